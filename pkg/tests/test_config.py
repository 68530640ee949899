import textwrap

import numpy as np
import pytest

from mixkin.config import DEFAULT_STRENGTH, parse_config, parse_config_text
from mixkin.errors import ConfigurationError
from mixkin.scenarios import build_kinetic, initial_profiles, output_times, velocity_grids

BASE = """
scenario = "space_homogeneous"

[[species]]
name = "light"
mass = 1.0
n = 1.0
u = [0.3, 0.0, 0.0]
T = 1.0

[[species]]
name = "heavy"
mass = 3.0
n = 0.5
T = 2.0
"""


def _parse(extra="", base=BASE):
    return parse_config_text(textwrap.dedent(base) + textwrap.dedent(extra))


def test_defaults():
    c = _parse()
    assert c.scenario == "space_homogeneous" and c.n_species == 2 and c.seed == 0
    assert c.species[1].regions[0].u == (0.0, 0.0, 0.0)
    assert c.space.cells == 1 and c.space.boundary == "periodic" and not c.space.limiter
    assert c.collision.angular_order == 8 and c.collision.deposit == "quadratic" and c.collision.matched
    assert c.time.dt == "auto" and c.time.cfl == 0.9 and c.time.scheme == "implicit_bgk_exponential"
    assert c.time.epsilon == 1.0 and c.time.scaling == "unscaled" and c.time.t_end == 1.0
    assert c.velocity_grid.points == 16 and c.velocity_grid.width_factor == 6.0
    assert c.output.fields == ("n", "u", "T") and c.output.interval is None
    assert c.entropy and c.pairs == () and c.rules == ()
    assert c.study.epsilons == (0.1, 0.01) and c.study.reference == "euler_st"


def test_pairs_and_rules():
    c = _parse("""
        [[pair]]
        species = [1, 0]
        kernel = "hard_sphere"
        nu_multiplier = 0.75

        [[pair]]
        species = [0, 0]

        [[rule]]
        species = [0, 1]
        bit = 1
    """)
    assert c.pairs[0].species == (0, 1) and c.pairs[0].kernel == "hard_sphere" and c.pairs[0].nu_multiplier == 0.75
    assert c.pairs[1].strength == DEFAULT_STRENGTH
    assert c.rules[0].species == (0, 1) and c.rules[0].bit == 1 and c.rules[0].x_max == c.space.length


def test_species_index_out_of_range():
    with pytest.raises(ConfigurationError, match=r"references species 3, but only 2 are defined"):
        _parse("""
            [[pair]]
            species = [0, 3]
        """)
    with pytest.raises(ConfigurationError, match=r"rule\[0\]\.species' references species 2"):
        _parse("""
            [[rule]]
            species = [2, 0]
            bit = 0
        """)


def test_duplicate_key_reports_line():
    text = 'scenario = "space_homogeneous"\nseed = 1\nseed = 2\n'
    with pytest.raises(ConfigurationError, match=r"parse error.*line 3"):
        parse_config_text(text)


@pytest.mark.parametrize("extra, pattern", [
    ("[time]\nt_ned = 1.0\n", r"unknown key 'time\.t_ned'"),
    ("[time]\nscheme = \"magic\"\n", r"time\.scheme' must be one of"),
    ("[time]\ncfl = 1.5\n", r"time\.cfl' must lie in"),
    ("[time]\ndt = -1.0\n", r"time\.dt' must be"),
    ("[velocity_grid]\npoints = 2\n", r"points' must be >= 3"),
    ("[[pair]]\nspecies = [0, 1]\nnu_multiplier = 0.4\n", r"admissibility"),
    ("[[pair]]\nspecies = [0, 1]\n[[pair]]\nspecies = [1, 0]\n", r"configured twice"),
    ("[output]\nfields = [\"p\"]\n", r"output\.fields"),
    ("[space]\ncells = 4\n", r"needs space\.cells = 1"),
])
def test_invalid_values_are_named(extra, pattern):
    with pytest.raises(ConfigurationError, match=pattern):
        _parse(extra)


def test_missing_and_malformed_fields():
    with pytest.raises(ConfigurationError, match=r"unknown key 'colour'"):
        parse_config_text("colour = 1\n" + BASE)
    with pytest.raises(ConfigurationError, match=r"missing required field 'scenario'"):
        parse_config_text("[[species]]\nname='a'\nmass=1.0\nn=1.0\nT=1.0\n")
    with pytest.raises(ConfigurationError, match=r"species\[1\]\.mass' must be > 0"):
        _parse(base=BASE.replace("mass = 3.0", "mass = -3.0"))
    with pytest.raises(ConfigurationError, match="parse error"):
        parse_config_text("scenario = \n")
    with pytest.raises(ConfigurationError, match="at least one"):
        parse_config_text('scenario = "space_homogeneous"\n')
    with pytest.raises(ConfigurationError, match="unique"):
        _parse(base=BASE.replace('"heavy"', '"light"'))


def test_config_file_errors_carry_source(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("bogus = true\n" + BASE)
    with pytest.raises(ConfigurationError, match=r"bad\.toml: unknown key 'bogus'"):
        parse_config(p)
    with pytest.raises(ConfigurationError, match="cannot read"):
        parse_config(tmp_path / "missing.toml")
    ok = tmp_path / "ok.toml"
    ok.write_text(BASE)
    assert parse_config(ok).source == str(ok)


def test_regions_cover_domain_and_later_regions_win():
    c = parse_config_text(textwrap.dedent("""
        scenario = "transport_1d"
        [space]
        cells = 4
        [[species]]
        name = "a"
        mass = 1.0
        [[species.region]]
        n = 1.0
        T = 1.0
        [[species.region]]
        x_min = 0.5
        n = 0.125
        T = 0.8
    """))
    centers = np.array([0.125, 0.375, 0.625, 0.875])
    n, u, T = initial_profiles(c, centers)
    np.testing.assert_array_equal(n[0], [1.0, 1.0, 0.125, 0.125])
    np.testing.assert_array_equal(T[0], [1.0, 1.0, 0.8, 0.8])
    gap = parse_config_text(textwrap.dedent("""
        scenario = "transport_1d"
        [space]
        cells = 4
        [[species]]
        name = "a"
        mass = 1.0
        [[species.region]]
        x_max = 0.5
        n = 1.0
        T = 1.0
    """))
    with pytest.raises(ConfigurationError, match="cell 2"):
        initial_profiles(gap, centers)


def test_scenario_cross_checks():
    one = BASE.split("[[species]]")
    single = one[0] + "[[species]]" + one[1]
    with pytest.raises(ConfigurationError, match="exactly two species"):
        _parse(base=single.replace("space_homogeneous", "euler_mt"))
    with pytest.raises(ConfigurationError, match="heavy_dominant"):
        _parse("[time]\nscaling = \"heavy_dominant\"\n", base=single)
    with pytest.raises(ConfigurationError, match="velocity_grid"):
        _parse("[velocity_grid]\nbounds_min = [-1, -1, -1]\n")


def test_default_velocity_grids_scale_with_mass():
    c = _parse(base=BASE.replace("[0.3, 0.0, 0.0]", "[0.0, 0.0, 0.0]"))
    setup = build_kinetic(c)
    g1, g2 = setup.state.grids
    w1, w2 = g1.bounds_max - g1.bounds_min, g2.bounds_max - g2.bounds_min
    np.testing.assert_allclose(w1[1] / w2[1], np.sqrt(3.0), rtol=1e-12)
    assert g1.size == 16**3
    n, u, T = initial_profiles(c, setup.state.space.centers)
    assert velocity_grids(c, n, u, T)[0].size == g1.size


def test_output_times():
    c = _parse("[time]\nt_end = 1.0\n[output]\ninterval = 0.25\n")
    assert output_times(c) == [0.0, 0.25, 0.5, 0.75, 1.0]
    c = _parse("[time]\nt_end = 1.0\n[output]\ninterval = 0.3\n")
    assert output_times(c) == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])
    assert output_times(_parse()) == [0.0, 1.0]
