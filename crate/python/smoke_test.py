"""Smoke test for the pathstar Python bindings.

Build and install first:  pip install --no-build-isolation ./crates/py
"""

import pathstar


def main():
    assert pathstar.vocab_size(10) == 15
    assert pathstar.count_instances(6, 2, 2) == 240
    assert pathstar.count_instances(100, 5, 5) > 2**64

    g = pathstar.Graph(3, [[7, 1, 6], [8, 0, 2], [4, 9, 5]], 10)
    inst = pathstar.Instance(g, 6)
    assert inst.leading == 7
    assert inst.target_path() == [3, 7, 1, 6]

    inst = pathstar.sample_instance(100, 3, 5, seed=1)
    sample = pathstar.tokenize(inst, markers=2, seed=2)
    back = pathstar.parse_sample(sample.text, 100)
    assert back.tokens == sample.tokens

    for name in pathstar.solver_names():
        if name == "arms_constant":
            s = pathstar.tokenize(inst, perm="arm", seed=3)
        elif name == "causal":
            s = pathstar.tokenize(inst, q_pos="start", seed=3)
        elif name == "log_doubling":
            s = sample
        else:
            s = pathstar.tokenize(inst, seed=3)
        r = pathstar.solve(name, s)
        assert r.valid, (name, r)
        print(f"{name:<18} valid={r.valid} kqv_count={r.kqv_count} loop_iterations={r.loop_iterations}")

    group = pathstar.structured_expand(inst, 2, seed=4)
    assert len({s.instance.target for s in group}) == 3

    samples = [pathstar.tokenize(pathstar.sample_instance(100, 4, 5, seed=i), seed=i) for i in range(4000)]
    report = pathstar.chc_eval(samples, seed=0)
    acc = report["position_accuracy"]
    assert all(a == 1.0 for i, a in enumerate(acc) if i != 1)
    assert abs(acc[1] - 0.25) < 0.03
    print(f"clever-hans leading accuracy at D=4: {acc[1]:.4f}")
    print("ok")


if __name__ == "__main__":
    main()
