"""Quick end-to-end check of the extension module. Run after `maturin develop`."""

import json
import math

import pmsearch


def main():
    inst = pmsearch.fixture()
    assert inst.n == 6
    rep = inst.check()
    assert rep.regime == "single_violation", rep.regime
    assert [v[0] for v in rep.violations] == ["{1,5}"]
    assert -0.0015 <= rep.violations[0][2] <= -0.0005

    m = inst.m
    assert pmsearch.violation_set(m).regime == "p_matrix"
    assert abs(pmsearch.principal_minor(m, "{1,5}") - 11.27) < 0.005
    assert pmsearch.principal_minor(m, [1, 5]) == pmsearch.principal_minor(m, "{1,5}")

    again = pmsearch.Instance.from_json(inst.to_json())
    assert again == inst

    base = pmsearch.random_base(7, seed=3, index=1)
    assert pmsearch.violation_set(base).regime == "p_matrix"
    f = pmsearch.forge(m, epsilon=1e-3)
    assert f.report.regime == "single_violation"
    assert f.instance.check().witness == f.witness

    assert pmsearch.reproduce_fixture()["all_pass"]

    hit = pmsearch.first_hit(8, 1, 2000, seed=1)
    assert abs(hit["mean_rounds"] - hit["exact_expectation"]) < 5 * hit["stderr_rounds"]
    assert pmsearch.exact_rounds(255, 1) == 128.0

    assert pmsearch.prior_entropy(6) == math.log2(63)
    assert pmsearch.mi_exact_nonadaptive(6, 10) <= pmsearch.mi_chain_bound(6, 10) + 1e-12
    exact, union = pmsearch.all_zero_probability(6, 10)
    assert abs(exact - 53 / 63) < 1e-12 and union <= exact
    tv = pmsearch.transcript_tv_distance(6, "wor", 10, "{1}", "{2,3}")
    assert abs(tv - (1 - 53 * 52 / (63 * 62))) < 1e-12

    err, used = pmsearch.verify_schur_identity(50, 6, seed=0)
    assert err < 1e-10 and used > 0
    pairs = pmsearch.conditional_sign_study(6, 2000)
    assert len(pairs) == 4 and all(sum(p[k] for k in ("n_pp", "n_pn", "n_np", "n_nn")) == 2000 for p in pairs)

    try:
        pmsearch.violation_set([[1.0, 2.0]])
    except pmsearch.PmsearchError:
        pass
    else:
        raise AssertionError("ragged matrix accepted")

    print(json.dumps({"version": pmsearch.__version__, "tv": tv, "schur_err": err}))
    print("smoke test ok")


if __name__ == "__main__":
    main()
