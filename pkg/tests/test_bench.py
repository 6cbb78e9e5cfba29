import io

import numpy as np
import pytest

from layerfem.bench import (DEFAULT_EPS_SWEEP, LPS_SIGMA, StudyConfig, dof_order,
                            energy_norm_of_exact, run_study)
from layerfem.fd import FD_SIGMA
from layerfem.norms import estimated_orders, write_csv


def _csv(records):
    buf = io.StringIO()
    write_csv(records, buf)
    return buf.getvalue()


def _small(**kw):
    base = dict(method="galerkin", p=2, N=(8, 16, 32))
    base.update(kw)
    return StudyConfig(**base)


def test_deterministic():
    a = [r.values for r in run_study(_small())]
    b = [r.values for r in run_study(_small())]
    assert a == b


def test_orders_match_errors():
    recs = run_study(_small(study="supercloseness"))
    for norm in recs[0].values:
        pairs = [(r.N, r.values[norm]) for r in recs]
        expect = estimated_orders(pairs)
        got = [r.orders[norm] for r in recs[:-1]]
        np.testing.assert_allclose(np.array(got), np.array(expect), rtol=1e-14)
        assert norm not in recs[-1].orders
    assert "energy:vec" in recs[0].values and len(_csv(recs).splitlines()) > 3


def test_eps_sweep_labels():
    recs = run_study(StudyConfig(study="eps-uniformity", method="galerkin", p=1, N=(8,),
                                 eps=(1e-2, 1e-4)))
    assert len(recs) == 2
    assert "balanced[eps=1.0e-02]" in recs[0].values and "energy[eps=1.0e-04]" in recs[1].values
    assert len(DEFAULT_EPS_SWEEP) == 8


def test_fd_study_records():
    recs = run_study(StudyConfig(study="convergence", method="fd-upwind", N=(8, 16), eps=1e-4))
    assert [r.dofs for r in recs] == [64, 256]
    assert set(recs[0].values) == {"linf", "eta", "eta_tilde"}


def test_adapt_study():
    cfg = StudyConfig(study="adapt", method="fd-upwind", eps=1e-4)
    cfg.adapt.max_dofs = 500
    recs = run_study(cfg)
    assert recs[-1].dofs <= 500 and all(r.values["linf"] > 0 for r in recs)


def test_default_sigmas_and_meshes():
    assert _small(p=4).resolved_sigma() == 5.5
    assert _small(method="lps").resolved_sigma() == LPS_SIGMA
    assert StudyConfig(study="balanced", p=1).resolved_sigma() == 2.5
    assert StudyConfig(study="balanced", p=1).resolved_mesh().kind == "shishkin"
    fd = StudyConfig(method="fd-upwind")
    assert fd.resolved_sigma() == FD_SIGMA and fd.resolved_mesh().kind == "shishkin"
    assert _small().resolved_mesh().kind == "bakhvalov-s"
    assert StudyConfig(N=(8,), extended=True).n_list() == (8, 128, 256, 320)


@pytest.mark.parametrize("bad", [dict(study="nope"), dict(method="supg"), dict(p=0),
                                 dict(space="trunk"), dict(interp="spline"), dict(N=(2,)),
                                 dict(eps=0.0), dict(eps=2.0), dict(study="balanced", p=2),
                                 dict(study="adapt"), dict(method="fd-upwind", study="balanced"),
                                 dict(mesh="graded"), dict(sigma=-1.0)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        StudyConfig(**bad).validate()


def test_dof_order():
    d = np.array([1e3, 4e3, 1.6e4, 6.4e4])
    assert dof_order(d, 3 * d**-0.5) == pytest.approx(-0.5)
    assert dof_order(d, d**-1.0, min_dofs=4e3) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        dof_order(d, d, min_dofs=1e5)


def test_energy_norm_of_exact_small_mesh():
    # coarser than the reference computation but already accurate
    assert energy_norm_of_exact(N=16, p=4) == pytest.approx(0.99875, abs=5e-5)
