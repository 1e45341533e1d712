#!/usr/bin/env python3
# Copyright (c) 2026, The dlens Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes a small random GPT-2 and reference outputs from transformers.

The reference values are computed in float64 by the transformers GPT-2
implementation and frozen into expected.json.
"""
import argparse
import json
from pathlib import Path

import torch
from safetensors.torch import save_file
from tokenizers import Tokenizer, models, pre_tokenizers, decoders
from transformers import GPT2Config, GPT2LMHeadModel

PROMPTS = [
    "The capital of France is",
    "Emma will move to Dublin or Paris for work, or Madrid or Dublin for school. She will move to Dublin or Paris, or Madrid or",
    "Hello world",
    "a",
]
CONTINUATIONS = [
    ("Henry will work as a painter", " this summer"),
    ("The capital of France is", " Paris, obviously."),
]
PROBE_IDS = [0, 1, 13, 262, 286, 290, 318, 464, 4881, 6342, 50256]


def load_tokenizer(vocab_dir: Path) -> Tokenizer:
    bpe = models.BPE.from_file(str(vocab_dir / "vocab.json"), str(vocab_dir / "merges.txt"))
    tok = Tokenizer(bpe)
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)
    tok.decoder = decoders.ByteLevel()
    return tok


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--vocab-dir", type=Path, default=Path("data/gpt2"))
    ap.add_argument("--out", type=Path, default=Path("tests/data/tiny_gpt2"))
    ap.add_argument("--seed", type=int, default=20260101)
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    cfg = GPT2Config(vocab_size=50257, n_positions=128, n_embd=8, n_layer=2, n_head=2,
                     layer_norm_epsilon=1e-5, activation_function="gelu_new")
    model = GPT2LMHeadModel(cfg).eval()
    with torch.no_grad():
        for name, p in model.transformer.named_parameters():
            if name.endswith("ln_1.weight") or name.endswith("ln_2.weight") or name == "ln_f.weight":
                p.copy_(1.0 + 0.3 * torch.randn_like(p))
            else:
                p.copy_(0.5 * torch.randn_like(p))

    args.out.mkdir(parents=True, exist_ok=True)
    tensors = {k: v.detach().contiguous().float() for k, v in model.transformer.state_dict().items()
               if not k.endswith(".attn.bias") and not k.endswith(".attn.masked_bias")}
    save_file(tensors, str(args.out / "model.safetensors"), metadata={"format": "pt"})
    (args.out / "config.json").write_text(json.dumps({
        "model_type": "gpt2", "n_layer": 2, "n_head": 2, "n_embd": 8, "vocab_size": 50257,
        "n_positions": 128, "layer_norm_epsilon": 1e-5}, indent=2) + "\n")

    tok = load_tokenizer(args.vocab_dir)
    m64 = model.double()
    expected = {"generator": "transformers GPT2LMHeadModel, float64", "probe_ids": PROBE_IDS,
                "prompts": [], "continuations": []}
    with torch.no_grad():
        for text in PROMPTS:
            ids = tok.encode(text).ids
            logits = m64(torch.tensor([ids])).logits[0]
            final = logits[-1]
            top2 = torch.topk(final, 2).values
            expected["prompts"].append({
                "text": text,
                "ids": ids,
                "argmax": int(final.argmax()),
                "argmax_margin": float(top2[0] - top2[1]),
                "probe_logits": [[float(logits[t, i]) for i in PROBE_IDS] for t in range(len(ids))],
                "final_logsumexp": float(torch.logsumexp(final, 0)),
            })
        for prefix, cont in CONTINUATIONS:
            p_ids = tok.encode(prefix).ids
            c_ids = tok.encode(cont).ids
            logits = m64(torch.tensor([p_ids + c_ids])).logits[0]
            lp = torch.log_softmax(logits, -1)
            total = sum(float(lp[len(p_ids) - 1 + i, c]) for i, c in enumerate(c_ids))
            expected["continuations"].append({"prefix": prefix, "continuation": cont, "prefix_ids": p_ids,
                                              "continuation_ids": c_ids, "logprob": total})
    (args.out / "expected.json").write_text(json.dumps(expected, indent=1) + "\n")


if __name__ == "__main__":
    main()
