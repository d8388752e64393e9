import io

import numpy as np
import pytest

from sigma_skew import (
    AlphaSchedule,
    ParameterError,
    Path,
    decompose,
    make_sigma_process,
    sample_z_alpha,
    sample_z_alpha_schedule,
    to_cadlag_k,
)
from sigma_skew.signs import write_sign_csv, write_sign_table_csv


def _dec(seed=0, n=4096, dt=2.0 ** -12, kind="abs_bm"):
    src = make_sigma_process(kind, n, dt, seed)
    return src, decompose(src.x, 0.0)


def test_schedule_validation():
    with pytest.raises(ParameterError, match=r"alpha out of \[0,1\]"):
        AlphaSchedule.constant(1.3)
    with pytest.raises(ParameterError):
        AlphaSchedule.parse("0:0.3,1:-0.1")
    s = AlphaSchedule.coerce("0:0.3,1:0.8")
    assert s.levels == (0.3, 0.8)
    assert AlphaSchedule.coerce(0.25).is_constant


def test_alpha_one_and_zero():
    src, dec = _dec(1)
    up = sample_z_alpha(dec, 1.0, 5)
    down = sample_z_alpha(dec, 0.0, 5)
    assert np.all(up.excursion_signs == 1)
    assert np.all(down.excursion_signs == -1)
    assert np.array_equal(up.values * src.x.values, src.x.values)


def test_alpha_out_of_range():
    _, dec = _dec(1, n=64)
    with pytest.raises(ParameterError, match=r"alpha out of \[0,1\]"):
        sample_z_alpha(dec, 1.5, 0)


def test_sign_values_vanish_exactly_on_zero_mask():
    _, dec = _dec(2)
    sp = sample_z_alpha(dec, 0.4, 9)
    assert np.array_equal(sp.values == 0, dec.zero_mask)
    assert set(np.unique(sp.values)) <= {-1, 0, 1}


def test_positive_fraction_alpha_07():
    # 100,000+ excursions; the binomial sd at 0.7 is ~0.0014
    signs, r = [], 0
    while sum(s.size for s in signs) < 100_000:
        _, dec = _dec(r, n=4096)
        signs.append(sample_z_alpha(dec, 0.7, 1000 + r).excursion_signs[:, 0])
        r += 1
    z = np.concatenate(signs)
    assert abs(np.mean(z == 1) - 0.7) <= 0.005


def test_constant_schedule_reduces_to_constant_alpha():
    src, dec = _dec(3)
    a = sample_z_alpha(dec, 0.7, 42)
    b = sample_z_alpha_schedule(dec, AlphaSchedule.constant(0.7), (0.0, src.x.dt), 42)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.excursion_signs, b.excursion_signs)


def test_schedule_forced_switch():
    # one excursion straddling t = 1 on a unit grid
    x = Path(0.0, 0.25, [0, 1, 2, 3, 4, 3, 2, 1, 0])
    dec = decompose(x, 0.0)
    sp = sample_z_alpha_schedule(dec, AlphaSchedule.parse("0:1,1:0"), (0.0, 0.25), 7)
    assert sp.values.tolist() == [0, 1, 1, 1, -1, -1, -1, -1, 0]


def test_breakpoint_time_uses_right_interval():
    x = Path(0.0, 0.5, [0, 1, 1, 1, 0])
    dec = decompose(x, 0.0)
    sp = sample_z_alpha_schedule(dec, AlphaSchedule.parse("0:0,1:1"), (0.0, 0.5), 1)
    assert sp.values.tolist() == [0, -1, 1, 1, 0]


def test_schedule_fraction_per_interval():
    sched = AlphaSchedule.parse("0:0.3,1:0.8")
    cols, r = [], 0
    while sum(c.shape[0] for c in cols) < 100_000:
        src, dec = _dec(r, n=2048, dt=2.0 ** -10)
        cols.append(sample_z_alpha_schedule(dec, sched, (0.0, src.x.dt), 500 + r).excursion_signs)
        r += 1
    z = np.concatenate(cols)
    assert abs(np.mean(z[:, 0] == 1) - 0.3) <= 0.005
    assert abs(np.mean(z[:, 1] == 1) - 0.8) <= 0.005


def test_signs_depend_only_on_seed_and_ordinal():
    # a longer path shares its first excursions' signs with a shorter prefix
    src, dec = _dec(4, n=4096)
    g = int(dec.intervals[5, 1])
    short = decompose(Path(0.0, src.x.dt, src.x.values[: g + 1]), 0.0)
    a = sample_z_alpha(dec, 0.5, 11).excursion_signs[:5]
    b = sample_z_alpha(short, 0.5, 11).excursion_signs[:5]
    assert np.array_equal(a, b)


def test_cadlag_k_single_excursion():
    x = Path(0.0, 1.0, [0, 1, 2, 1, 0, 0])
    dec = decompose(x, 0.0)
    sp = sample_z_alpha(dec, 1.0, 0)
    assert to_cadlag_k(sp, dec).values.tolist() == [1, 1, 1, 1, 0, 0]


def test_cadlag_k_identity():
    for kind in ("abs_bm", "drawdown", "product_abs"):
        src, dec = _dec(6, kind=kind)
        sp = sample_z_alpha(dec, 0.5, 3)
        k = to_cadlag_k(sp, dec).values
        assert np.array_equal(k[dec.gamma] * src.x.values, sp.values * src.x.values)
        up = sample_z_alpha(dec, 1.0, 3)
        assert np.array_equal(to_cadlag_k(up, dec).values[dec.gamma] * src.x.values, src.x.values)


def test_sign_csv_formats():
    dec = decompose(Path(0.0, 1.0, [0, 1, 0, -1, 0]), 0.0)
    sp = sample_z_alpha(dec, 1.0, 0)
    buf = io.StringIO()
    write_sign_csv(sp, buf)
    assert buf.getvalue() == "index,sign\n0,0\n1,1\n2,0\n3,1\n4,0\n"
    buf = io.StringIO()
    write_sign_table_csv(sp, buf)
    assert buf.getvalue() == "n,i,zeta\n0,0,1\n1,0,1\n"
