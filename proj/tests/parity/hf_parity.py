"""Checks the C++ encoder and tokenizer against transformers' BERT.

A small random BertForSequenceClassification is saved, converted with
tools/convert_hf_bert.py and run through `frames classify`; the scores must
match torch's softmax output.

    python hf_parity.py <frames binary> <repo root>
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import torch
from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

TEXTS = [
    "Protesters gathered outside the parliament on Tuesday.",
    "The MINISTER's statement, issued late, blamed the “activists” for the chaos!",
    "Café owners in Zürich said the march was peaceful; naïve observers disagreed.",
    "Unknown wordz like qwertyuiop end up split or unknown.",
    "short",
]

WORDS = ("the protest protesters gathered outside parliament on tuesday minister statement issued late "
         "blamed for chaos activists cafe owners in zurich said march was peaceful naive observers "
         "disagreed unknown word like end up split or short s 's").split()


def build_vocab():
    vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    chars = sorted({c for w in WORDS for c in w} | set(".,;!'“”"))
    vocab += chars + ["##" + c for c in chars if c.isalnum()]
    vocab += ["##s", "##z", "##ed", "##ing"]
    vocab += WORDS
    return list(dict.fromkeys(vocab))


def main():
    frames_bin, repo = sys.argv[1], Path(sys.argv[2])
    sys.path.insert(0, str(repo / "tools"))
    from convert_hf_bert import convert

    torch.manual_seed(0)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        vocab = build_vocab()
        hf_dir = tmp / "hf"
        hf_dir.mkdir()
        (hf_dir / "vocab.txt").write_text("\n".join(vocab) + "\n")
        config = BertConfig(vocab_size=len(vocab), hidden_size=32, num_hidden_layers=2, num_attention_heads=4,
                            intermediate_size=64, max_position_embeddings=64, num_labels=6,
                            initializer_range=0.2)
        model = BertForSequenceClassification(config).eval()
        model.save_pretrained(hf_dir)
        tokenizer = BertTokenizer(str(hf_dir / "vocab.txt"), do_lower_case=True)

        out_dir = tmp / "converted"
        assert convert(hf_dir, out_dir), "head not detected"

        paras = tmp / "paras.jsonl"
        with open(paras, "w") as f:
            for i, t in enumerate(TEXTS):
                f.write(json.dumps({"para_id": f"p#{i}", "doc_id": "p", "ordinal": i, "text": t}) + "\n")
        preds = tmp / "preds.jsonl"
        subprocess.run([frames_bin, "classify", "--model", str(out_dir), "--in", str(paras), "--out", str(preds)],
                       check=True)
        got = [json.loads(line) for line in preds.read_text().splitlines()]

        worst = 0.0
        codes = ["AR01", "HI02", "CF03", "MF04", "EF05", "NO06"]
        for text, row in zip(TEXTS, got):
            enc = tokenizer(text, return_tensors="pt", truncation=True, max_length=64)
            with torch.no_grad():
                probs = torch.softmax(model(**enc).logits[0].double(), dim=-1).tolist()
            ours = [row["scores"][c] for c in codes]
            gap = max(abs(a - b) for a, b in zip(probs, ours))
            worst = max(worst, gap)
            if gap > 1e-5:
                print(f"mismatch {gap:.2e} on {text!r}: torch {probs} ours {ours}")
                print("tokens:", tokenizer.tokenize(text))
                return 1
        print(f"{len(TEXTS)} texts match transformers within {worst:.1e}")
        return 0


if __name__ == "__main__":
    sys.exit(main())
