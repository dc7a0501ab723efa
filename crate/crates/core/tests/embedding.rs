use cogaug::embedding::{
    embed, CacheMode, CachedEmbedder, EmbeddingError, EmbeddingProvider, HashingEmbedder, MockEmbedder,
};

#[test]
fn cache_round_trip_serves_replay_only_mode() {
    let dir = tempfile::tempdir().unwrap();
    let texts = ["えっと、孫が来ました。", "公園でお弁当を食べました。", "桜がきれいでした。"];
    let live = CachedEmbedder::new(MockEmbedder::new(3, 32), CacheMode::ReadWrite);
    let vectors: Vec<_> = texts.iter().map(|t| embed(t, &live).unwrap()).collect();
    live.persist(dir.path()).unwrap();

    let replay = CachedEmbedder::new(MockEmbedder::new(3, 32), CacheMode::ReplayOnly);
    assert_eq!(replay.load(dir.path()).unwrap(), 3);
    for (t, v) in texts.iter().zip(&vectors) {
        assert_eq!(embed(t, &replay).unwrap(), *v);
    }
    assert!(matches!(embed("未知の文", &replay), Err(EmbeddingError::CacheMiss(_))));
}

#[test]
fn cache_refuses_other_provider() {
    let dir = tempfile::tempdir().unwrap();
    let a = CachedEmbedder::new(MockEmbedder::new(1, 8), CacheMode::ReadWrite);
    embed("テキスト", &a).unwrap();
    a.persist(dir.path()).unwrap();
    let b = CachedEmbedder::new(HashingEmbedder::new(8), CacheMode::ReplayOnly);
    assert_eq!(b.load(dir.path()).unwrap(), 0);
    assert!(b.id().starts_with("ngram-hash"));
}
