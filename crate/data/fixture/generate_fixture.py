"""Regenerates the bundled synthetic fixture corpus.

The fixture mimics the shape of the real dataset (30 participants, one shared
prompt, paired written/oral narratives) but every text here is invented.
Run from the repository root:  python3 data/fixture/generate_fixture.py
"""
import json
import random
from pathlib import Path

PROMPT = "最近あった一番よかったことについて教えてください。"

# score -> count; 30 records, max class count 8, singletons at 23, 24, 27
DISTRIBUTION = {22: 2, 23: 1, 24: 1, 25: 2, 26: 2, 27: 1, 28: 6, 29: 7, 30: 8}

EVENTS = [
    ("孫", "遊びに来てくれました", "近くの公園で一緒にお弁当を食べました", "桜がとてもきれいに咲いていました", "嬉しかった"),
    ("娘", "温泉旅行に連れて行ってくれました", "露天風呂から山の紅葉が見えました", "夜は地元の料理をたくさんいただきました", "幸せだった"),
    ("息子", "新しい仕事が決まったと電話をくれました", "ずっと心配していたのでほっとしました", "週末にはお祝いの食事をしました", "安心した"),
    ("友人", "久しぶりに訪ねて来ました", "昔の写真を見ながら思い出話をしました", "気がつくと夕方になっていました", "楽しかった"),
    ("妻", "誕生日にケーキを焼いてくれました", "家族みんなで歌を歌いました", "孫たちが手紙を書いてくれました", "嬉しかった"),
    ("近所の人", "畑で取れた野菜を分けてくれました", "その野菜で煮物を作りました", "とてもおいしくできました", "ありがたかった"),
    ("孫娘", "成人式の着物姿を見せに来てくれました", "小さい頃のことを思い出しました", "一緒に写真をたくさん撮りました", "感動した"),
    ("夫", "庭に花の苗を植えてくれました", "毎朝水をやるのが楽しみになりました", "先週きれいな花が咲きました", "嬉しかった"),
    ("老人会の仲間", "日帰りのバス旅行に誘ってくれました", "海の見える食堂でお昼を食べました", "帰りのバスではみんなで歌いました", "楽しかった"),
    ("ひ孫", "初めて歩いたと聞きました", "動画を送ってもらって何度も見ました", "今度会いに行く約束をしました", "幸せだった"),
    ("弟", "遠くから会いに来てくれました", "二人で両親のお墓参りに行きました", "帰りにお蕎麦を食べました", "懐かしかった"),
    ("孫", "大学に合格したと知らせてくれました", "毎日頑張っていたのを知っていました", "お祝いに時計を贈りました", "誇らしかった"),
    ("娘婿", "壊れていた棚を直してくれました", "部屋がすっきり片付きました", "お礼に夕飯をごちそうしました", "助かった"),
    ("昔の同僚", "手紙をくれました", "若い頃の職場の話が書いてありました", "すぐに返事を書きました", "懐かしかった"),
    ("孫", "運動会に招待してくれました", "かけっこで一番になりました", "みんなで大きな声で応援しました", "嬉しかった"),
    ("主治医", "検査の結果が良かったと言ってくれました", "食事に気をつけていた甲斐がありました", "帰りに好きな和菓子を買いました", "ほっとした"),
    ("姉", "手作りの梅干しを送ってくれました", "母の味とそっくりでした", "電話でたくさん話をしました", "嬉しかった"),
    ("近所の子どもたち", "お祭りで神輿を担いでいました", "私も法被を着て見に行きました", "夜には花火も上がりました", "元気が出た"),
    ("息子夫婦", "新しい家に招いてくれました", "日当たりの良い広い台所がありました", "みんなで鍋を囲みました", "安心した"),
    ("孫", "ピアノの発表会に出ました", "難しい曲を最後まで弾きました", "大きな拍手をもらっていました", "感激した"),
    ("友人", "一緒に美術館へ行こうと誘ってくれました", "好きな画家の絵をゆっくり見ました", "喫茶店でコーヒーを飲みました", "楽しかった"),
    ("娘", "母の日に花束を持って来てくれました", "カーネーションを玄関に飾りました", "部屋が明るくなりました", "嬉しかった"),
    ("釣り仲間", "朝早くから船に乗せてくれました", "大きな鯛が釣れました", "夜はその鯛を刺身にしました", "最高だった"),
    ("孫", "一緒に餃子を作りに来てくれました", "包み方を教えてあげました", "焼きたてをみんなで食べました", "楽しかった"),
    ("妹", "入院していたのが退院しました", "元気な顔を見て安心しました", "今度一緒に旅行に行く約束をしました", "ほっとした"),
    ("地域のボランティア", "公民館で書道教室を開いてくれました", "久しぶりに筆を持ちました", "先生にほめられました", "嬉しかった"),
    ("孫", "結婚式に呼んでくれました", "花嫁さんがとてもきれいでした", "スピーチで私の名前を出してくれました", "涙が出るほど嬉しかった"),
    ("夫", "一緒に若い頃住んでいた町を訪ねました", "商店街は少し変わっていました", "昔通った喫茶店がまだありました", "懐かしかった"),
    ("息子", "新しい眼鏡を買ってくれました", "新聞の字がよく見えるようになりました", "本を読むのがまた楽しくなりました", "ありがたかった"),
    ("友人", "庭の柿をたくさん持って来てくれました", "干し柿を作って配りました", "みんなに喜ばれました", "嬉しかった"),
]

FILLERS = ["えっと", "あの", "その", "まあ", "うーん", "なんか"]


def written(ev):
    who, event, d1, d2, feel = ev
    return f"先日、{who}が{event}。{d1}。{d2}。本当に{feel}です。"


def plain(s):
    s = s.replace("いただきました", "いただいた").replace("歌いました", "歌った").replace("行きました", "行った").replace("作りました", "作った").replace("つれて行ってくれました", "連れてってくれた")
    return s.replace("ました", "た").replace("でした", "だった").replace("ありました", "あった")


def oral(ev, score, rng):
    who, event, d1, d2, feel = ev
    if score >= 28:
        density, pause = 0.3, ""
    elif score >= 25:
        density, pause = 0.6, "ー"
    else:
        density, pause = 0.9, "…"
    parts = [f"この間ね、{who}が{plain(event)}", plain(d1), plain(d2), f"うん、{feel}ですね"]
    out = []
    for j, p in enumerate(parts):
        if rng.random() < density:
            out.append(rng.choice(FILLERS) + pause + "、")
        out.append(p)
        last = j == len(parts) - 1
        out.append("。" if last or rng.random() < 0.5 else "ね。")
    if score < 25:
        out.append("えっと…なんだったかな。")
    return "".join(out)


def main():
    rng = random.Random(20260115)
    scores = [s for s, c in sorted(DISTRIBUTION.items()) for _ in range(c)]
    rng.shuffle(scores)
    out_dir = Path(__file__).parent
    lines = []
    for i, (score, ev) in enumerate(zip(scores, EVENTS)):
        age = rng.randint(72, 86)
        # pin the cohort's age bounds
        age = {0: 86, 1: 72}.get(i, age)
        rec = {
            "patient_id": f"P{i + 1:02d}",
            "age": age,
            "hds_score": score,
            "oral_text": oral(ev, score, rng),
            "written_text": written(ev),
            "transcription_source": "manual" if age >= 74 else "automatic",
        }
        lines.append(json.dumps(rec, ensure_ascii=False, separators=(",", ":")))
    (out_dir / "corpus.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    meta = {"prompt_text": PROMPT}
    (out_dir / "corpus.meta.json").write_text(
        json.dumps(meta, ensure_ascii=False, separators=(",", ":")) + "\n", encoding="utf-8"
    )


if __name__ == "__main__":
    main()
