#!/usr/bin/env python3
# Copyright (c) 2026, The dlens Authors
# SPDX-License-Identifier: Apache-2.0
"""Records greedy GPT-2 small continuations with transformers.

Run once against the same weights directory the C++ loader reads
(model.safetensors + config.json); writes tests/data/gpt2_golden.json.
"""
import argparse
import json
from pathlib import Path

import torch
from transformers import GPT2LMHeadModel, GPT2TokenizerFast

PROMPTS = [
    "The capital of France is",
    "The Eiffel Tower is located in the city of",
    "One, two, three, four,",
    "Mary will go to France or Spain, or Germany or France. She will go to France or Spain, or Germany or",
    "The quick brown fox jumps over the lazy",
    "In 1492, Columbus sailed across the",
    "def add(a, b):\n    return",
    "The opposite of hot is",
    "Monday, Tuesday, Wednesday,",
    "Water is made of hydrogen and",
]
STEPS = 5


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", required=True, help="GPT-2 small directory")
    ap.add_argument("--tokenizer", default=str(Path(__file__).resolve().parents[1] / "data" / "gpt2"))
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "tests" / "data" / "gpt2_golden.json"))
    args = ap.parse_args()

    tok = GPT2TokenizerFast(vocab_file=f"{args.tokenizer}/vocab.json", merges_file=f"{args.tokenizer}/merges.txt")
    model = GPT2LMHeadModel.from_pretrained(args.model).eval()
    prompts = []
    with torch.no_grad():
        for text in PROMPTS:
            ids = tok.encode(text)
            seq = list(ids)
            cont, margins = [], []
            for _ in range(STEPS):
                logits = model(torch.tensor([seq])).logits[0, -1]
                top = torch.topk(logits, 2)
                cont.append(int(top.indices[0]))
                margins.append(float(top.values[0] - top.values[1]))
                seq.append(cont[-1])
            prompts.append({"text": text, "ids": ids, "continuation_ids": cont,
                            "continuation": tok.decode(cont), "margins": margins})
    Path(args.out).write_text(json.dumps({"model": "gpt2", "steps": STEPS, "prompts": prompts}, indent=1) + "\n")


if __name__ == "__main__":
    main()
