"""Smoke test for the pyembda bindings.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/pyembda-*.whl
"""

import math
import os
import random
import tempfile

import pyembda


def write_corpora(d):
    rng = random.Random(0)
    src, tgt = [], []
    for _ in range(3000):
        topic = rng.randrange(6)
        src.append(" ".join(
            f"f{rng.randrange(5)}" if rng.random() < 0.25 else f"t{topic}w{rng.randrange(12)}"
            for _ in range(rng.randrange(6, 12))
        ))
    cluster = [f"t{t}w1" for t in range(4)]
    for _ in range(60):
        tgt.append(" ".join(rng.choice(cluster + ["f0", "f1"]) for _ in range(8)))
    paths = os.path.join(d, "src.txt"), os.path.join(d, "tgt.txt")
    for path, lines in zip(paths, (src, tgt)):
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
    return paths, cluster


def main():
    assert pyembda.sigmoid(0.0) == 0.5
    assert pyembda.sigmoid(100.0) == pyembda.sigmoid(6.0)
    w = pyembda.attention([0.0, 0.0], [False, True])
    assert math.isclose(sum(w), 1.0) and w[1] > w[0]

    with tempfile.TemporaryDirectory() as d:
        (src, tgt), cluster = write_corpora(d)
        vocab = pyembda.Vocabulary.build(src, min_count=5)
        assert len(vocab) > 0 and "t0w1" in vocab
        pairs = pyembda.PairTable.extract(tgt, vocab, window=5)
        assert len(pairs) > 0 and pairs.contains("t0w1", "t1w1")

        tightness = {}
        for mode in ("sg", "sg-di", "cbow", "cbow-da"):
            model = pyembda.train(mode, src, vocab, pairs if "-" in mode else None,
                                  dim=20, epochs=3, negatives=5, seed=7)
            assert model.mode == mode and model.dim == 20
            emb = model.embeddings()
            tightness[mode] = emb.tightness(cluster)
            assert len(emb.nearest("t0w1", k=5)) == 5
            rows, (v1, v2) = emb.pca(cluster)
            assert len(rows) == len(cluster) and v1 >= v2 >= 0.0

            path = os.path.join(d, f"{mode}.vec")
            model.save(path)
            loaded = pyembda.Embeddings.load(path)
            a, b = model.vector("t0w1"), loaded.vector("t0w1")
            assert all(abs(x - y) <= 5e-6 * abs(x) for x, y in zip(a, b))

        sg = pyembda.Embeddings.load(os.path.join(d, "sg.vec"))
        di = pyembda.Embeddings.load(os.path.join(d, "sg-di.vec"))
        shifts = sg.shift(di, src, tgt)
        assert shifts and all(0.0 <= s <= 2.0 for _, _, s in shifts)

        try:
            pyembda.train("sg-di", src, vocab)
        except ValueError:
            pass
        else:
            raise AssertionError("sg-di without pairs should fail")

    print("tightness:", {k: round(v, 4) for k, v in tightness.items()})
    print("pyembda smoke test passed")


if __name__ == "__main__":
    main()
