"""Train the Trojan classifier on the bundled corpus and inspect mistakes.

The corpus has 30 clean designs and 30 with an inserted trigger/leak
pattern. An 80/20 split with the default configuration reaches F1 = 1.0 in
a few seconds on a laptop CPU.
"""
import json
import time
from pathlib import Path

from hwgnn import (
    DFG,
    TrainConfig,
    build_vocab,
    encode,
    evaluate_classifier,
    hw2graph,
    load_design_dir,
    normalize,
    split,
    train_graph_classifier,
)

CORPUS = Path(__file__).resolve().parent.parent / "corpus" / "ht"


def main() -> None:
    manifest = json.loads((CORPUS / "labels.json").read_text(encoding="utf-8"))
    started = time.perf_counter()

    graphs = {}
    for name in sorted(manifest):
        g = hw2graph(load_design_dir(CORPUS / name), DFG, design_name=name)
        graphs[name] = normalize(g)
    vocab = build_vocab(list(graphs.values()))
    tensors = {
        name: encode(g, vocab, label=manifest[name]["label"])
        for name, g in graphs.items()
    }
    print(f"extracted and encoded {len(tensors)} designs "
          f"in {time.perf_counter() - started:.1f}s")

    part = split(sorted(tensors), ratio=0.2, seed=0)
    cfg = TrainConfig(seed=0)
    ckpt = train_graph_classifier(
        [tensors[i] for i in part.train],
        [tensors[i] for i in part.test],
        cfg,
        vocab_fingerprint=vocab.fingerprint,
    )
    report = evaluate_classifier(ckpt.model, [tensors[i] for i in part.test])

    print(f"test precision {report.precision:.3f}, recall {report.recall:.3f}, "
          f"F1 {report.f1:.3f}, accuracy {report.accuracy:.3f}")
    wrong = [r for r in report.per_item if r["prediction"] != r["label"]]
    if wrong:
        print("misclassified designs:")
        for r in wrong:
            print(f"  {r['graph_id']}: predicted {r['prediction']}, was {r['label']}")
    else:
        print("no misclassifications on the held-out designs")
    print(f"total wall time {time.perf_counter() - started:.1f}s")


if __name__ == "__main__":
    main()
