#!/usr/bin/env python3
# Copyright (c) 2026, The dlens Authors
# SPDX-License-Identifier: Apache-2.0
"""Writes a tokenization golden file using the Hugging Face tokenizers BPE."""
import argparse
import json
import random
from pathlib import Path

from tokenizers import Tokenizer, models, pre_tokenizers

WORDS = ("the of and to in is was that for it with as his on be at by had are but from or have an they which "
         "one you were her all she there would their we him been has when who will more no if out so said what up "
         "its about into than them can only other new some could time these two may then do first any my now "
         "Liechtenstein Reykjavik Ouagadougou photography mountaineering saxophone kombucha cappuccino "
         "France Spain Norway Dublin Paris Madrid violin cello chess juice tea coffee").split()
PUNCT = list(".,;:!?'\"()[]{}-_/\\@#$%^&*+=<>|~`")
CONTRACTIONS = ["'s", "'t", "'re", "'ve", "'m", "'ll", "'d", "'S", "'T"]
UNICODE = ["café", "naïve", "Zürich", "São Paulo", "Москва", "Ελλάδα", "東京", "北京市", "😀", "🇫🇷", "ﬁ",
           "İstanbul", "ß", "Ω", "١٢٣", "½", " ", " ", "​", "é", "한국어", "ไทย"]
SPACES = [" ", "  ", "   ", "\t", "\n", "\r\n", " \n ", "\n\n"]


def random_line(rng: random.Random) -> str:
    parts = []
    for _ in range(rng.randint(1, 18)):
        r = rng.random()
        if r < 0.5:
            w = rng.choice(WORDS)
            if rng.random() < 0.2:
                w = w.upper() if rng.random() < 0.5 else w.capitalize()
            parts.append(w)
        elif r < 0.6:
            parts.append(str(rng.randint(0, 10 ** rng.randint(1, 7))))
        elif r < 0.7:
            parts.append(rng.choice(PUNCT) * rng.randint(1, 3))
        elif r < 0.8:
            parts.append(rng.choice(CONTRACTIONS))
        elif r < 0.9:
            parts.append(rng.choice(UNICODE))
        else:
            parts.append(rng.choice(SPACES))
        parts.append(rng.choice([" ", " ", " ", "", "  "]))
    return "".join(parts)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--vocab-dir", type=Path, default=Path("data/gpt2"))
    ap.add_argument("--stimuli", type=Path, help="optional JSONL of stimuli to mix in")
    ap.add_argument("--out", type=Path, default=Path("tests/data/tokenizer_golden.jsonl"))
    ap.add_argument("--lines", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    tok = Tokenizer(models.BPE.from_file(str(args.vocab_dir / "vocab.json"), str(args.vocab_dir / "merges.txt")))
    tok.pre_tokenizer = pre_tokenizers.ByteLevel(add_prefix_space=False)

    rng = random.Random(args.seed)
    texts = ["The capital of France is", "", " ", "Hello world", "I'm here, aren't you?", "  leading spaces",
             "trailing spaces   ", "tabs\tand\nnewlines\n", "Liechtenstein", " Liechtenstein"]
    if args.stimuli:
        for line in args.stimuli.read_text().splitlines():
            item = json.loads(line)
            texts.append(item["s1_text"] + " " + item["s2_prefix"])
            if len(texts) >= args.lines // 4:
                break
    while len(texts) < args.lines:
        texts.append(random_line(rng))
    with args.out.open("w", encoding="utf-8") as f:
        for t in texts[: args.lines]:
            f.write(json.dumps({"text": t, "ids": tok.encode(t).ids}, ensure_ascii=False) + "\n")


if __name__ == "__main__":
    main()
