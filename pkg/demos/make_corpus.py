"""Regenerate the bundled synthetic corpus.

Writes two design collections under corpus/: a Trojan-detection set
(30 clean + 30 designs carrying a comparator-trigger/leak pattern) and an
IP-piracy set (8 base circuits, 5 renamed/reordered variants each).  Both
are seeded, so reruns reproduce the committed files byte for byte.
"""
from pathlib import Path

from hwgnn import synth

ROOT = Path(__file__).resolve().parent.parent / "corpus"


def main() -> None:
    ht = synth.ht_corpus(ROOT / "ht", n_clean=30, n_trojan=30, seed=7)
    ip = synth.ip_corpus(ROOT / "ip", n_variants=5, seed=11)
    print(f"wrote {len(ht)} Trojan-task designs under {ROOT / 'ht'}")
    print(f"wrote {len(ip)} piracy-task designs under {ROOT / 'ip'}")


if __name__ == "__main__":
    main()
