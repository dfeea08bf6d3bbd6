"""Quick check that the extension module imports and answers sensibly.

Build first, e.g. `maturin develop -m crates/python/Cargo.toml`.
"""

import aou


def pr_box(s):
    # p(a,b|x,y) = 1/2 when a xor b == x and y
    p = []
    for x in range(2):
        for y in range(2):
            for a in range(2):
                for b in range(2):
                    p.append(0.5 if (a ^ b) == (x & y) else 0.0)
    return aou.Correlation(s, p)


def main():
    s = aou.Scenario(2, 2)
    assert s.ns_dimension == 9, s.ns_dimension
    assert s.relation_rank() == 16 - 9
    assert aou.Scenario(2, 3).ns_dimension == 25
    assert len(s.basis_labels()) == 9

    pr = pr_box(s)
    assert pr.issues() == []
    assert pr.is_nonsignalling()
    assert abs(pr.bell_value(aou.chsh()) - 4.0) < 1e-9

    local = pr.is_local()
    assert local["status"] == "non_member", local
    assert local["certificate"]["type"] == "bell_witness"

    det = aou.Correlation.deterministic(s, 0)
    assert det.is_local()["status"] == "member"

    ns_max, _ = aou.maximize_over_ns(s, aou.chsh())
    local_max, _ = aou.maximize_over_local(s, aou.chsh())
    assert abs(ns_max - 4.0) < 1e-6 and abs(local_max - 2.0) < 1e-6

    c = aou.Correlation(aou.Scenario(1, 2), [0.5, 0.0, 0.0, 0.5]).classify(l_max=1)
    assert c["valid"] and c["qc_outer"][0][1]["status"] == "member", c

    try:
        aou.Scenario(0, 2)
    except ValueError:
        pass
    else:
        raise AssertionError("bad scenario accepted")

    assert aou.projection_test(2, [[1.0, 0.0]], random=5)["verdict"]["verdict"] == "pass"
    assert aou.projection_test(2, [[0.9, 0.0]], random=5)["verdict"]["verdict"] == "fail"

    report = aou.run_verify("linalg", seed=3)
    assert report["schema"] == aou.SCHEMA
    assert all(c["passed"] == c["total"] for c in report["checks"])

    print("smoke test ok")


if __name__ == "__main__":
    main()
