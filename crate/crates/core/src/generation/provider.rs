use std::sync::Arc;
use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use thiserror::Error;

use super::prompt::{fluency_band, FluencyBand, Style};
use super::replay::ReplayStore;
use super::{MAX_CHARS, MIN_CHARS};

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("API returned status {status}: {body}")]
    Api { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("no recorded output for prompt {0}")]
    ReplayMiss(String),
    #[error("provider configuration: {0}")]
    Config(String),
}

impl ProviderError {
    /// Whether repeating the same request could succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::Transport(_) => true,
            ProviderError::Api { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// Conditioned text generator: (system message, user message) -> text.
pub trait GenerationProvider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, system: &str, user: &str) -> Result<String, ProviderError>;
}

impl<P: GenerationProvider + ?Sized> GenerationProvider for Arc<P> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn complete(&self, system: &str, user: &str) -> Result<String, ProviderError> {
        (**self).complete(system, user)
    }
}

/// Serves outputs recorded in a [`ReplayStore`]; never touches the network.
pub struct ReplayProvider {
    store: Arc<ReplayStore>,
}

impl ReplayProvider {
    pub fn new(store: Arc<ReplayStore>) -> Self {
        Self { store }
    }
}

impl GenerationProvider for ReplayProvider {
    fn id(&self) -> &str {
        "replay"
    }

    fn complete(&self, system: &str, user: &str) -> Result<String, ProviderError> {
        let hash = super::prompt::prompt_hash(system, user);
        self.store
            .get_text(&hash)
            .map_err(|e| ProviderError::Transport(e.to_string()))?
            .ok_or(ProviderError::ReplayMiss(hash))
    }
}

/// Offline generator producing deterministic, style- and band-tagged
/// pseudo-monologues of valid length derived from the written narrative.
#[derive(Debug, Clone, Default)]
pub struct MockProvider;

pub const MOCK_PROVIDER_ID: &str = "mock-v1";

struct PromptFields<'a> {
    written: &'a str,
    style: Option<Style>,
    score: Option<i32>,
}

fn parse_prompt(user: &str) -> PromptFields<'_> {
    let written = user
        .split_once("---\n")
        .and_then(|(_, rest)| rest.split_once("\n---"))
        .map(|(w, _)| w)
        .unwrap_or(user);
    let style = user
        .lines()
        .find_map(|l| l.strip_prefix("Target style: "))
        .and_then(|s| s.trim().parse().ok());
    let score = user
        .split_once("score = ")
        .and_then(|(_, rest)| rest.split(':').next())
        .and_then(|s| s.trim().parse().ok());
    PromptFields { written, style, score }
}

fn style_frame(style: Option<Style>) -> (&'static str, &'static str) {
    match style {
        Some(Style::Conversational) => ("あのね、ちょっと聞いてくれる？", "まあ、そんな感じだったのよ。"),
        Some(Style::Emotional) => ("今思い出しても、胸がいっぱいになるんだけど…", "ああ、本当に幸せだなって、しみじみ思ったの。"),
        Some(Style::Fragmented) => ("えっと…そう、", "…うん、そういうこと。"),
        Some(Style::Storytelling) => ("順番に話すとね、", "それで、その日はおしまい。"),
        Some(Style::Concise) => ("短く言うとね。", "以上です。"),
        Some(Style::Humorous) => ("いやあ、笑っちゃうんだけどね、", "まあ、年寄りにはいい運動でした（笑）。"),
        Some(Style::StructuralParaphrase) => ("言い換えるとね、", "そういうことがあったんです。"),
        None => ("", ""),
    }
}

const HIGH_FILLERS: [&str; 3] = ["えっと、", "まあ、", "そうですね、"];
const MID_FILLERS: [&str; 4] = ["えっと、", "あの、", "その、", "なんていうか、"];
const LOW_FILLERS: [&str; 4] = ["えっと…", "あのー…", "その…", "うーん…"];
const PADDING: [&str; 4] = [
    "そのときのことは、今でもよく覚えています。",
    "また、ああいう日があるといいなと思います。",
    "家に帰ってからも、しばらくその話をしていました。",
    "なんだか、心があたたかくなりました。",
];

impl MockProvider {
    fn render(&self, system: &str, user: &str) -> String {
        let fields = parse_prompt(user);
        let band = fields.score.and_then(|s| fluency_band(s).ok());
        let seed = crate::hashing::seed_bytes(format!("{system}\u{0}{user}").as_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);

        let (fillers, rate): (&[&str], f64) = match band {
            Some(FluencyBand::High) | None => (&HIGH_FILLERS, 0.2),
            Some(FluencyBand::Mid) => (&MID_FILLERS, 0.5),
            Some(FluencyBand::Low) => (&LOW_FILLERS, 0.85),
        };
        let tag = format!(
            "【{}・{}】",
            fields.style.map(Style::name).unwrap_or("unknown"),
            match band {
                Some(FluencyBand::High) => "high",
                Some(FluencyBand::Mid) => "mid",
                Some(FluencyBand::Low) => "low",
                None => "unknown",
            }
        );

        let mut sentences: Vec<String> = fields
            .written
            .split(['。', '\n'])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        match fields.style {
            Some(Style::StructuralParaphrase) => sentences.reverse(),
            Some(Style::Fragmented) => {
                for s in &mut sentences {
                    *s = s.replace('、', "…、");
                }
            }
            Some(Style::Concise) => {
                for s in &mut sentences {
                    if let Some((head, _)) = s.split_once('、') {
                        *s = head.to_string();
                    }
                }
            }
            Some(Style::Storytelling) => {
                let n = sentences.len();
                for (i, s) in sentences.iter_mut().enumerate() {
                    let lead = if i == 0 {
                        "まず、"
                    } else if i + 1 == n {
                        "最後に、"
                    } else {
                        "それから、"
                    };
                    *s = format!("{lead}{s}");
                }
            }
            _ => {}
        }

        let (open, close) = style_frame(fields.style);
        let mut out = format!("{tag}{open}");
        for s in &sentences {
            if rng.random_bool(rate) {
                out.push_str(fillers.choose(&mut rng).expect("non-empty fillers"));
            }
            out.push_str(s);
            if fields.style == Some(Style::Humorous) && rng.random_bool(0.5) {
                out.push_str("（笑）");
            }
            out.push('。');
        }
        let mut pad = rng.random_range(0..PADDING.len());
        while out.chars().count() + close.chars().count() < MIN_CHARS {
            if rng.random_bool(rate) {
                out.push_str(fillers.choose(&mut rng).expect("non-empty fillers"));
            }
            out.push_str(PADDING[pad % PADDING.len()]);
            pad += 1;
        }
        out.push_str(close);
        if out.chars().count() > MAX_CHARS {
            out = out.chars().take(MAX_CHARS).collect();
        }
        out
    }
}

impl GenerationProvider for MockProvider {
    fn id(&self) -> &str {
        MOCK_PROVIDER_ID
    }

    fn complete(&self, system: &str, user: &str) -> Result<String, ProviderError> {
        Ok(self.render(system, user))
    }
}

pub const ENV_GEN_URL: &str = "COGAUG_GEN_URL";
pub const ENV_GEN_KEY: &str = "COGAUG_GEN_API_KEY";
pub const ENV_GEN_MODEL: &str = "COGAUG_GEN_MODEL";

/// Chat-completion client. The request body is
/// `{"model", "messages": [system, user], ..params}` and the reply is read
/// from `choices[0].message.content` (or a top-level `text` field).
pub struct LiveProvider {
    id: String,
    endpoint: String,
    api_key: String,
    model: String,
    /// Decoding parameters passed through verbatim (temperature etc.).
    pub params: Map<String, Value>,
    agent: ureq::Agent,
}

impl LiveProvider {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, model: impl Into<String>) -> Self {
        let model = model.into();
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            id: format!("live:{model}"),
            endpoint: endpoint.into(),
            api_key: api_key.into(),
            model,
            params: Map::new(),
            agent,
        }
    }

    pub fn from_env() -> Result<Self, ProviderError> {
        let endpoint = std::env::var(ENV_GEN_URL).map_err(|_| ProviderError::Config(format!("{ENV_GEN_URL} is not set")))?;
        let key = std::env::var(ENV_GEN_KEY).map_err(|_| ProviderError::Config(format!("{ENV_GEN_KEY} is not set")))?;
        let model = std::env::var(ENV_GEN_MODEL).unwrap_or_else(|_| "gpt-5".to_string());
        Ok(Self::new(endpoint, key, model))
    }

    pub fn request_body(&self, system: &str, user: &str) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let obj = body.as_object_mut().expect("object literal");
        for (k, v) in &self.params {
            obj.insert(k.clone(), v.clone());
        }
        body
    }
}

pub(crate) fn extract_completion(v: &Value) -> Option<String> {
    v.pointer("/choices/0/message/content")
        .or_else(|| v.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
}

impl GenerationProvider for LiveProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, system: &str, user: &str) -> Result<String, ProviderError> {
        let body = self.request_body(system, user);
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ProviderError::Api { status, body: text });
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        extract_completion(&v).ok_or_else(|| ProviderError::Malformed("no completion text in response".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generation::prompt::render_prompt;
    use crate::generation::validate_output;

    #[test]
    fn mock_output_is_valid_for_every_style_and_band() {
        let p = MockProvider;
        for score in [22, 26, 30] {
            for style in Style::ALL {
                let prompt = render_prompt("孫が来ました。公園に行きました。", score, style).unwrap();
                let out = p.complete(&prompt.system, &prompt.user).unwrap();
                assert!(validate_output(&out).is_accept(), "{style} {score}: {out}");
                assert!(out.contains(style.name()));
            }
        }
    }

    #[test]
    fn mock_is_deterministic_and_style_sensitive() {
        let p = MockProvider;
        let a = render_prompt("桜が咲いていました。", 24, Style::Emotional).unwrap();
        let b = render_prompt("桜が咲いていました。", 24, Style::Concise).unwrap();
        let x1 = p.complete(&a.system, &a.user).unwrap();
        let x2 = p.complete(&a.system, &a.user).unwrap();
        let y = p.complete(&b.system, &b.user).unwrap();
        assert_eq!(x1, x2);
        assert_ne!(x1, y);
    }

    #[test]
    fn mock_caps_long_narratives() {
        let long = "とても長い文章です、本当に。".repeat(200);
        let pr = render_prompt(&long, 29, Style::Storytelling).unwrap();
        let out = MockProvider.complete(&pr.system, &pr.user).unwrap();
        assert_eq!(out.chars().count(), MAX_CHARS);
    }

    #[test]
    fn parses_prompt_fields() {
        let pr = render_prompt("書いた文。", 26, Style::Humorous).unwrap();
        let f = parse_prompt(&pr.user);
        assert_eq!(f.written, "書いた文。");
        assert_eq!(f.style, Some(Style::Humorous));
        assert_eq!(f.score, Some(26));
    }

    #[test]
    fn live_body_has_chat_shape_and_passthrough() {
        let mut p = LiveProvider::new("http://localhost:1/v1", "k", "m");
        p.params.insert("temperature".into(), json!(0.7));
        let b = p.request_body("sys", "usr");
        assert_eq!(b["model"], "m");
        assert_eq!(b["messages"][0]["role"], "system");
        assert_eq!(b["messages"][1]["content"], "usr");
        assert_eq!(b["temperature"], 0.7);
    }

    #[test]
    fn completion_extraction() {
        let v = json!({"choices": [{"message": {"content": "hello"}}]});
        assert_eq!(extract_completion(&v).as_deref(), Some("hello"));
        assert_eq!(extract_completion(&json!({"text": "t"})).as_deref(), Some("t"));
        assert_eq!(extract_completion(&json!({"nope": 1})), None);
    }

    #[test]
    fn retryability() {
        assert!(ProviderError::Transport("x".into()).is_retryable());
        assert!(ProviderError::Api { status: 503, body: String::new() }.is_retryable());
        assert!(ProviderError::Api { status: 429, body: String::new() }.is_retryable());
        assert!(!ProviderError::Api { status: 401, body: String::new() }.is_retryable());
        assert!(!ProviderError::ReplayMiss("h".into()).is_retryable());
    }
}
