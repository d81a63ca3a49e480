import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pilotgain import (
    PackingConfig,
    PilotCodebook,
    RankDeficientError,
    build_design_matrix,
    closed_form_Rz,
    coherence_report,
    etf_gram_spectrum,
    gen_gaussian_complex,
    gen_gaussian_real,
    gen_grassmannian,
    nmse,
    noise_enhancement,
    theoretical_avg_enhancement_db,
)
from pilotgain.analysis import asymptotic_avg_enhancement_db
from pilotgain.model import DesignMatrix

from conftest import etf_gram, hesse_sic_q3, sic_q2


def design_from_gram(gram):
    """A DesignMatrix whose Gram is ``gram`` (D = Cholesky factor, padded)."""
    k = gram.shape[0]
    d = np.linalg.cholesky(gram).T.astype(complex)
    src = PilotCodebook(np.eye(k))
    return DesignMatrix(d, gram, src)


# -- noise_enhancement --------------------------------------------------------------


def test_identity_pilots_zero_enhancement():
    rep = noise_enhancement(build_design_matrix(PilotCodebook(np.eye(4))))
    np.testing.assert_allclose(rep.eigenvalues_inv, 1.0)
    assert rep.average_db == 0.0
    assert rep.condition_flag


@pytest.mark.parametrize("q", [2, 3, 4, 6, 9])
def test_analytic_etf_inverse_spectrum(q):
    rep = noise_enhancement(design_from_gram(etf_gram(q, q * q)))
    inv = np.sort(rep.eigenvalues_inv)
    assert abs(inv[0] - 1 / q) < 1e-10
    np.testing.assert_allclose(inv[1:], 1 + 1 / q, atol=1e-10)


@pytest.mark.parametrize("frame, q", [(sic_q2, 2), (hesse_sic_q3, 3)])
def test_explicit_etf_matches_closed_form(frame, q):
    p = PilotCodebook.from_matrix(frame(), normalize=True)
    rep = noise_enhancement(build_design_matrix(p))
    _, lam = etf_gram_spectrum(q, q * q)
    np.testing.assert_allclose(rep.eigenvalues_gram, lam, atol=1e-12)
    assert abs(rep.average_db - 10 * math.log10(1 + (q - 1) / q**2)) < 1e-12


def test_rank_deficient_report():
    rep = noise_enhancement(build_design_matrix(gen_gaussian_real(3, 9, 0)))
    assert not rep.condition_flag
    assert rep.average_db is None and rep.per_dimension_db is None
    assert rep.eigenvalues_gram.size == 9
    out = json.loads(rep.to_json())
    assert out["average_db"] is None
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[1][2:] == ["", ""]


@settings(max_examples=50, deadline=None)
@given(q=st.integers(2, 6), data=st.data())
def test_report_invariants(q, data):
    k = data.draw(st.integers(1, q * q))
    p = gen_gaussian_complex(q, k, data.draw(st.integers(0, 2**20)))
    rep = noise_enhancement(build_design_matrix(p))
    lam = rep.eigenvalues_gram
    assert np.all(np.diff(lam) <= 0)
    assert np.all(lam >= -1e-9)
    assert abs(lam.sum() - k) < 1e-8
    if rep.condition_flag:
        np.testing.assert_allclose(rep.eigenvalues_inv, 1 / lam, rtol=1e-15)
        np.testing.assert_allclose(rep.per_dimension_db, 10 * np.log10(rep.eigenvalues_inv), rtol=1e-15)
        assert rep.average_db == pytest.approx(10 * math.log10(np.mean(1 / lam)), abs=1e-12)
        # trace of the inverse Gram is an independent route to the average
        tr = np.trace(np.linalg.inv(build_design_matrix(p).gram))
        assert rep.average_db == pytest.approx(10 * math.log10(tr / k), rel=1e-8, abs=1e-10)


def test_report_csv_and_json_layout():
    rep = noise_enhancement(design_from_gram(etf_gram(3, 9)))
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert rows[0] == ["index", "lambda", "lambda_inv", "db"]
    assert len(rows) == 10
    assert float(rows[1][1]) == pytest.approx(3.0)
    d = json.loads(rep.to_json())
    assert d["k"] == 9 and len(d["per_dimension_db"]) == 9


def test_gaussian_codebook_large_enhancement_somewhere():
    worst = max(np.max(noise_enhancement(build_design_matrix(gen_gaussian_complex(6, 36, s))).per_dimension_db) for s in range(10))
    assert worst > 20.0


# -- closed forms -----------------------------------------------------------------------


def test_etf_spectrum_q3_k9():
    c_d, lam = etf_gram_spectrum(3, 9)
    assert c_d == 0.25
    np.testing.assert_allclose(lam, [3] + [0.75] * 8, atol=1e-15)


@pytest.mark.parametrize("q", range(2, 13))
def test_etf_spectrum_at_full_load(q):
    c_d, lam = etf_gram_spectrum(q, q * q)
    assert c_d == pytest.approx(1 / (q + 1), abs=1e-15)
    assert lam.sum() == pytest.approx(q * q, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(q=st.integers(2, 12), data=st.data())
def test_etf_spectrum_is_spectrum_of_constant_gram(q, data):
    k = data.draw(st.integers(q + 1, q * q))
    c_d, lam = etf_gram_spectrum(q, k)
    ref = np.sort(np.linalg.eigvalsh(etf_gram(q, k)))[::-1]
    np.testing.assert_allclose(lam, ref, atol=1e-10)
    # the general formula is the mean of the reciprocal spectrum
    assert theoretical_avg_enhancement_db(q, k) == pytest.approx(10 * math.log10(np.mean(1 / lam)), abs=1e-12)


@pytest.mark.parametrize("q, k", [(3, 3), (3, 2), (3, 10)])
def test_etf_spectrum_domain(q, k):
    with pytest.raises(ValueError):
        etf_gram_spectrum(q, k)


@pytest.mark.parametrize("q", range(2, 13))
def test_average_formula_specializes_at_full_load(q):
    assert abs(theoretical_avg_enhancement_db(q, q * q) - 10 * math.log10(1 + (q - 1) / q**2)) < 1e-12


def test_average_formula_values():
    assert theoretical_avg_enhancement_db(6, 36) == pytest.approx(10 * math.log10(41 / 36), abs=1e-12)
    assert theoretical_avg_enhancement_db(3, 9) == pytest.approx(10 * math.log10(11 / 9), abs=1e-12)
    # four-digit reference values
    assert theoretical_avg_enhancement_db(6, 36) == pytest.approx(0.5649, abs=1e-4)
    assert theoretical_avg_enhancement_db(3, 9) == pytest.approx(0.8716, abs=1e-4)
    assert theoretical_avg_enhancement_db(10, 100) == pytest.approx(0.3743, abs=1e-4)


def test_asymptote():
    assert asymptotic_avg_enhancement_db(10) == pytest.approx(0.4343, abs=5e-5)
    gaps = [asymptotic_avg_enhancement_db(q) - theoretical_avg_enhancement_db(q, q * q) for q in (10, 100, 1000)]
    assert gaps[0] < 0.07
    assert gaps[0] > gaps[1] > gaps[2] > 0


@pytest.mark.parametrize("q, k", [(1, 1), (3, 3), (3, 10)])
def test_average_formula_domain(q, k):
    with pytest.raises(ValueError):
        theoretical_avg_enhancement_db(q, k)


def test_packed_codebook_matches_closed_form():
    p = gen_grassmannian(3, 9, PackingConfig(seed=0))
    rep = coherence_report(p, 1e-6)
    assert rep.is_full_frame
    ne = noise_enhancement(build_design_matrix(p))
    _, lam = etf_gram_spectrum(3, 9)
    np.testing.assert_allclose(ne.eigenvalues_gram, lam, atol=1e-5)
    assert abs(ne.average_db - theoretical_avg_enhancement_db(3, 9)) < 1e-5


# -- R_z and NMSE ----------------------------------------------------------------------------


def test_closed_form_rz():
    d = build_design_matrix(PilotCodebook(np.eye(3)))
    np.testing.assert_array_equal(closed_form_Rz(d, 0.0), np.zeros((3, 3)))
    np.testing.assert_allclose(closed_form_Rz(d, 2.5), 2.5 * np.eye(3))
    etf = build_design_matrix(PilotCodebook.from_matrix(hesse_sic_q3(), normalize=True))
    ev = np.sort(np.linalg.eigvalsh(closed_form_Rz(etf, 1.0)))
    np.testing.assert_allclose(ev, [1 / 3] + [4 / 3] * 8, atol=1e-12)
    with pytest.raises(RankDeficientError):
        closed_form_Rz(build_design_matrix(gen_gaussian_real(3, 9, 0)), 1.0)
    with pytest.raises(ValueError):
        closed_form_Rz(d, -1.0)


def test_nmse():
    g = np.array([1.0, 2.0, 0.0])
    assert nmse(g, g) == 0
    assert nmse(g, np.zeros(3)) == 1
    assert nmse(g, 2 * g) == 1
    with pytest.raises(ValueError):
        nmse(np.zeros(3), g)
    with pytest.raises(ValueError):
        nmse(g, g[:2])


def test_packed_q6_per_dimension_levels():
    p = gen_grassmannian(6, 36, PackingConfig(seed=0))
    assert p.info.converged
    db = np.sort(noise_enhancement(build_design_matrix(p)).per_dimension_db)
    assert abs(db[0] - 10 * math.log10(1 / 6)) < 0.3
    np.testing.assert_allclose(db[1:], 10 * math.log10(7 / 6), atol=0.3)
    assert db[0] >= -8.0 and db[-1] <= 1.0
