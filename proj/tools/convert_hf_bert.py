#!/usr/bin/env python3
"""Convert a Hugging Face BERT checkpoint directory into the frames layout.

The output holds config.json, vocab.txt and model.bin. When the checkpoint
has a 6-way classification head the directory also gets label_map.json and
training_docs.json, so it loads as a trained model; otherwise it is an
encoder for `frames train --encoder`.

    python tools/convert_hf_bert.py path/to/bert-base-uncased out/bert-base-uncased
"""

import argparse
import json
import shutil
import struct
import sys
from pathlib import Path

CODES = ["AR01", "HI02", "CF03", "MF04", "EF05", "NO06"]


def load_state_dict(src: Path):
    import torch

    safetensors = src / "model.safetensors"
    if safetensors.exists():
        from safetensors.torch import load_file

        return load_file(str(safetensors))
    return torch.load(src / "pytorch_model.bin", map_location="cpu", weights_only=True)


def normalise_name(name: str) -> str:
    # Bare BertModel checkpoints have no "bert." prefix; old ones use gamma/beta.
    if not name.startswith(("bert.", "classifier.", "cls.")):
        name = "bert." + name
    return name.replace("LayerNorm.gamma", "LayerNorm.weight").replace("LayerNorm.beta", "LayerNorm.bias")


def write_tensors(path: Path, tensors):
    with open(path, "wb") as f:
        f.write(b"FRMW")
        f.write(struct.pack("<II", 1, len(tensors)))
        for name, t in tensors:
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", t.dim()))
            for d in t.shape:
                f.write(struct.pack("<Q", d))
            f.write(t.contiguous().float().numpy().astype("<f4").tobytes())


def convert(src: Path, dst: Path) -> bool:
    config = json.loads((src / "config.json").read_text())
    if config.get("hidden_act", "gelu") != "gelu":
        raise SystemExit("only gelu activations are supported")
    state = load_state_dict(src)
    tensors = []
    for name, t in state.items():
        name = normalise_name(name)
        if name.startswith("cls.") or name.endswith("position_ids") or not t.is_floating_point():
            continue
        tensors.append((name, t))

    dst.mkdir(parents=True, exist_ok=True)
    write_tensors(dst / "model.bin", tensors)
    shutil.copy(src / "vocab.txt", dst / "vocab.txt")
    (dst / "config.json").write_text(json.dumps(config, indent=2) + "\n")

    head = dict(tensors).get("classifier.weight")
    has_head = head is not None and head.shape[0] == len(CODES)
    if has_head:
        (dst / "label_map.json").write_text(json.dumps({c: i for i, c in enumerate(CODES)}, indent=2) + "\n")
        (dst / "training_docs.json").write_text(
            json.dumps({"config_fingerprint": "converted", "doc_ids": []}, indent=2) + "\n")
    return has_head


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("src", type=Path)
    ap.add_argument("dst", type=Path)
    args = ap.parse_args(argv)
    has_head = convert(args.src, args.dst)
    print(json.dumps({"out": str(args.dst), "classifier_head": has_head}))


if __name__ == "__main__":
    sys.exit(main())
