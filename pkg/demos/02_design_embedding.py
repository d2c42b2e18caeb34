"""Embed a few designs with an untrained model.

Even with random weights the embedding is a deterministic function of the
graph, and isomorphic designs (renamed/reordered variants of one base
circuit) land on very similar vectors, while different circuits do not.
"""
from pathlib import Path

import numpy as np

from hwgnn import DFG, build_model, build_vocab, embed, encode, hw2graph, load_design_dir, normalize
from hwgnn.graph2vec import DEFAULT_ARCH

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def cos(a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def main() -> None:
    names = ["ip_adder_v0", "ip_adder_v1", "ip_parity_v0"]
    graphs = {}
    for name in names:
        g = hw2graph(load_design_dir(CORPUS / "ip" / name), DFG, design_name=name)
        graphs[name] = normalize(g)

    vocab = build_vocab(list(graphs.values()))
    print(f"vocabulary: {len(vocab)} node labels")

    arch = dict(DEFAULT_ARCH, in_dim=len(vocab))
    model = build_model(arch, seed=42, vocab_fingerprint=vocab.fingerprint)

    vectors = {}
    for name, g in graphs.items():
        t = encode(g, vocab)
        vectors[name] = embed(model, t).data.reshape(-1)
        print(f"{name}: embedding dim {vectors[name].size}, "
              f"first 4 components {np.round(vectors[name][:4], 3)}")

    print(f"\ncos(adder_v0, adder_v1)  = {cos(vectors['ip_adder_v0'], vectors['ip_adder_v1']):.4f}"
          f"   (same base circuit)")
    print(f"cos(adder_v0, parity_v0) = {cos(vectors['ip_adder_v0'], vectors['ip_parity_v0']):.4f}"
          f"   (different circuits)")


if __name__ == "__main__":
    main()
