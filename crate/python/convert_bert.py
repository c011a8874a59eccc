"""Convert a Hugging Face BERT checkpoint into the encoder format read by hopcheck.

Writes ``encoder.json``, ``encoder.bin`` (little-endian float64) and ``vocab.txt``
into the output directory. Point ``HOPCHECK_ASSET_DIR`` at the parent of a
directory named ``pretrained-12x768`` to use it as the pretrained backend.

    python convert_bert.py bert-base-uncased $HOPCHECK_ASSET_DIR/pretrained-12x768
"""

import argparse
import json
import os
import struct

import torch
from transformers import BertModel, BertTokenizer


def tensor_layout(cfg):
    names = [
        "embeddings.word_embeddings.weight",
        "embeddings.position_embeddings.weight",
        "embeddings.token_type_embeddings.weight",
        "embeddings.LayerNorm.weight",
        "embeddings.LayerNorm.bias",
    ]
    for layer in range(cfg.num_hidden_layers):
        p = f"encoder.layer.{layer}."
        for dense in ["attention.self.query", "attention.self.key", "attention.self.value", "attention.output.dense"]:
            names += [p + dense + ".weight", p + dense + ".bias"]
        names += [p + "attention.output.LayerNorm.weight", p + "attention.output.LayerNorm.bias"]
        for dense in ["intermediate.dense", "output.dense"]:
            names += [p + dense + ".weight", p + dense + ".bias"]
        names += [p + "output.LayerNorm.weight", p + "output.LayerNorm.bias"]
    return names


def export(model):
    """(name, 2-D float64 tensor) pairs; dense weights transposed to in x out."""
    state = model.state_dict()
    out = []
    for name in tensor_layout(model.config):
        t = state[name].detach().to(torch.float64)
        if t.dim() == 1:
            t = t.unsqueeze(0)
        elif "embeddings" not in name:
            t = t.t()
        out.append((name, t.contiguous()))
    return out


def encoder_config(cfg):
    return {
        "vocab_size": cfg.vocab_size,
        "hidden": cfg.hidden_size,
        "layers": cfg.num_hidden_layers,
        "heads": cfg.num_attention_heads,
        "intermediate": cfg.intermediate_size,
        "max_positions": cfg.max_position_embeddings,
        "type_vocab_size": cfg.type_vocab_size,
        "layer_norm_eps": cfg.layer_norm_eps,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("model", help="model name or local directory")
    ap.add_argument("out", help="output directory")
    args = ap.parse_args()

    model = BertModel.from_pretrained(args.model, add_pooling_layer=False)
    tok = BertTokenizer.from_pretrained(args.model)
    if model.config.hidden_act != "gelu":
        raise SystemExit(f"unsupported activation {model.config.hidden_act}")

    os.makedirs(args.out, exist_ok=True)
    tensors = export(model)
    meta = {
        "format": "hopcheck-encoder",
        "version": 1,
        "config": encoder_config(model.config),
        "params": [{"name": n, "shape": list(t.shape)} for n, t in tensors],
    }
    with open(os.path.join(args.out, "encoder.json"), "w") as f:
        json.dump(meta, f, indent=1)
    with open(os.path.join(args.out, "encoder.bin"), "wb") as f:
        for _, t in tensors:
            f.write(struct.pack(f"<{t.numel()}d", *t.flatten().tolist()))
    vocab = sorted(tok.vocab.items(), key=lambda kv: kv[1])
    with open(os.path.join(args.out, "vocab.txt"), "w") as f:
        for token, _ in vocab:
            f.write(token + "\n")


if __name__ == "__main__":
    main()
