#!/usr/bin/env python3
# Copyright (c) 2026, The dlens Authors
# SPDX-License-Identifier: Apache-2.0
"""Float64 numpy forward pass of the hand-built 1-layer, 1-head, d_model 4
fixture used by the C++ tests. Prints the values frozen in test_forward.cpp.

Every parameter comes from f(salt, i, j) = ((13*salt + 7*i + 3*j) % 17 - 8) / 8.
Biases use f(salt, 0, j) / 4 and layer-norm gains 1 + f(salt, 0, j) / 4.
"""
import json

import numpy as np

V, C, D, H = 5, 4, 4, 1


def f(salt, i, j):
    return ((13 * salt + 7 * i + 3 * j) % 17 - 8) / 8.0


def mat(salt, rows, cols):
    return np.array([[f(salt, i, j) for j in range(cols)] for i in range(rows)])


def bias(salt, n):
    return np.array([f(salt, 0, j) / 4 for j in range(n)])


def gain(salt, n):
    return 1.0 + bias(salt, n)


def ln(x, w, b, eps=1e-5):
    mu = x.mean(-1, keepdims=True)
    var = ((x - mu) ** 2).mean(-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * w + b


def gelu(x):
    return 0.5 * x * (1 + np.tanh(np.sqrt(2 / np.pi) * (x + 0.044715 * x ** 3)))


def forward(ids):
    wte, wpe = mat(1, V, D), mat(2, C, D)
    x = wte[ids] + wpe[: len(ids)]
    h = ln(x, gain(3, D), bias(4, D))
    qkv = h @ mat(5, D, 3 * D) + bias(6, 3 * D)
    q, k, v = qkv[:, :D], qkv[:, D:2 * D], qkv[:, 2 * D:]
    s = q @ k.T / np.sqrt(D // H)
    s = s + np.triu(np.full_like(s, -np.inf), 1)
    a = np.exp(s - s.max(-1, keepdims=True))
    a /= a.sum(-1, keepdims=True)
    x = x + (a @ v) @ mat(7, D, D) + bias(8, D)
    h = ln(x, gain(9, D), bias(10, D))
    x = x + gelu(h @ mat(11, D, 4 * D) + bias(12, 4 * D)) @ mat(13, 4 * D, D) + bias(14, D)
    x = ln(x, gain(15, D), bias(16, D))
    return x @ wte.T, a


def logsoftmax(z):
    return z - np.log(np.exp(z - z.max()).sum()) - z.max()


logits, attn = forward([0, 1])
full, _ = forward([0, 1, 2, 3])
cont = logsoftmax(full[1])[2] + logsoftmax(full[2])[3]
print(json.dumps({"logits_01": logits.tolist(), "attention_01": attn.tolist(),
                  "logprob_01_then_23": float(cont)}, indent=1))
