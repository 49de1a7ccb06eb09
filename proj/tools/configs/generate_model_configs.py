#!/usr/bin/env python3
# Copyright 2026 The RaggedShard Authors. All rights reserved.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes the bundled model configs from the public Hugging Face configs.

Shapes follow the checkpoint parameter names. Fused expert tensors
(E, in, out) are flattened to (E*in, out) so that row granularity counts rows
of one expert matrix. FFN matrices carry "sweep": true; `raggedshard sweep`
and `--granularity` override their row granularity.
"""

import json
import pathlib

HERE = pathlib.Path(__file__).resolve().parent

ELEMENT = {"kind": "element"}
ROWS1 = {"kind": "rows", "value": 1}


def t(name, shape, sweep=False):
    entry = {"name": name, "shape": shape, "granularity": ROWS1 if sweep else ELEMENT}
    if sweep:
        entry["sweep"] = True
    return entry


def loop(var, lo, hi, body):
    return {"for": var, "range": [lo, hi], "body": body}


def gpt_oss_120b():
    # openai/gpt-oss-120b config.json: hidden_size 2880, num_hidden_layers 36,
    # num_local_experts 128, intermediate_size 2880, 64 query heads and 8 KV
    # heads of head_dim 64, vocab_size 201088, untied embeddings.
    h, layers, experts, inter, vocab = 2880, 36, 128, 2880, 201088
    q, kv = 64 * 64, 8 * 64
    p = "layers.{i}."
    layer = [
        t(p + "attn.q_proj.weight", [q, h]),
        t(p + "attn.q_proj.bias", [q]),
        t(p + "attn.k_proj.weight", [kv, h]),
        t(p + "attn.k_proj.bias", [kv]),
        t(p + "attn.v_proj.weight", [kv, h]),
        t(p + "attn.v_proj.bias", [kv]),
        t(p + "attn.o_proj.weight", [h, q]),
        t(p + "attn.o_proj.bias", [h]),
        t(p + "attn.sinks", [64]),
        t(p + "mlp.router.weight", [experts, h]),
        t(p + "mlp.router.bias", [experts]),
        t(p + "mlp.experts.gate_up_proj", [experts * h, 2 * inter], sweep=True),
        t(p + "mlp.experts.gate_up_proj_bias", [experts, 2 * inter]),
        t(p + "mlp.experts.down_proj", [experts * inter, h], sweep=True),
        t(p + "mlp.experts.down_proj_bias", [experts, h]),
        t(p + "input_layernorm.weight", [h]),
        t(p + "post_attention_layernorm.weight", [h]),
    ]
    return {
        "name": "gpt-oss-120b",
        "source": "huggingface.co/openai/gpt-oss-120b config.json; bf16 training copy",
        "dtype_bytes": 2,
        "tensors": [t("embed_tokens.weight", [vocab, h]), loop("i", 0, layers, layer),
                    t("norm.weight", [h]), t("lm_head.weight", [vocab, h])],
        "groups": [
            {"name": "embed", "tensors": ["embed_tokens.weight"]},
            loop("i", 0, layers, [{"name": "layers.{i}", "prefix": p}]),
            {"name": "final", "tensors": ["norm.weight", "lm_head.weight"]},
        ],
    }


def deepseek_v3_671b():
    # deepseek-ai/DeepSeek-V3 config.json: hidden_size 7168, num_hidden_layers
    # 61, first_k_dense_replace 3, intermediate_size 18432, moe_intermediate_size
    # 2048, n_routed_experts 256, n_shared_experts 1, q_lora_rank 1536,
    # kv_lora_rank 512, 128 heads with qk_nope 128 / qk_rope 64 / v 128,
    # vocab_size 129280. The MTP module is not included.
    h, layers, dense, inter, moe, routed, vocab = 7168, 61, 3, 18432, 2048, 256, 129280
    heads, nope, rope, vdim, q_rank, kv_rank = 128, 128, 64, 128, 1536, 512
    p = "layers.{i}."
    attn = [
        t(p + "self_attn.q_a_proj.weight", [q_rank, h]),
        t(p + "self_attn.q_a_layernorm.weight", [q_rank]),
        t(p + "self_attn.q_b_proj.weight", [heads * (nope + rope), q_rank]),
        t(p + "self_attn.kv_a_proj_with_mqa.weight", [kv_rank + rope, h]),
        t(p + "self_attn.kv_a_layernorm.weight", [kv_rank]),
        t(p + "self_attn.kv_b_proj.weight", [heads * (nope + vdim), kv_rank]),
        t(p + "self_attn.o_proj.weight", [h, heads * vdim]),
    ]
    norms = [
        t(p + "input_layernorm.weight", [h]),
        t(p + "post_attention_layernorm.weight", [h]),
    ]

    def ffn(prefix, width):
        return [
            t(prefix + "gate_proj.weight", [width, h], sweep=True),
            t(prefix + "up_proj.weight", [width, h], sweep=True),
            t(prefix + "down_proj.weight", [h, width], sweep=True),
        ]

    dense_layer = attn + ffn(p + "mlp.", inter) + norms
    moe_layer = attn + [
        t(p + "mlp.gate.weight", [routed, h]),
        t(p + "mlp.gate.e_score_correction_bias", [routed]),
        loop("j", 0, routed, ffn(p + "mlp.experts.{j}.", moe)),
    ] + ffn(p + "mlp.shared_experts.", moe) + norms
    return {
        "name": "deepseek-v3-671b",
        "source": "huggingface.co/deepseek-ai/DeepSeek-V3 config.json; bf16 training copy",
        "dtype_bytes": 2,
        "tensors": [t("embed_tokens.weight", [vocab, h]), loop("i", 0, dense, dense_layer),
                    loop("i", dense, layers, moe_layer),
                    t("norm.weight", [h]), t("lm_head.weight", [vocab, h])],
        "groups": [
            {"name": "embed", "tensors": ["embed_tokens.weight"]},
            loop("i", 0, layers, [{"name": "layers.{i}", "prefix": p}]),
            {"name": "final", "tensors": ["norm.weight", "lm_head.weight"]},
        ],
    }


def main():
    for name, cfg in [("gpt_oss_120b.json", gpt_oss_120b()),
                      ("deepseek_v3_671b.json", deepseek_v3_671b())]:
        (HERE / name).write_text(json.dumps(cfg, indent=1) + "\n")


if __name__ == "__main__":
    main()
