import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraclab.config import ConfigError, RunConfig


def test_defaults_and_comments():
    cfg = RunConfig.parse("""
        # a comment line
        s = 0.75   # trailing comment
        p = 3
        ladder = 33, 65, 129
        g = hat
        g.c = 1.0
        g.w = 0.5
    """)
    assert cfg.s == 0.75 and cfg.p == 3.0 and cfg.ladder == (33, 65, 129)
    assert cfg.g_params == {"c": 1.0, "w": 0.5} and cfg.m == 65


@pytest.mark.parametrize("text, key", [
    ("bogus = 1", "bogus"),
    ("s = 0.5\ns = 0.6", "s"),
    ("m = 6.5", "m"),
    ("s = half", "s"),
    ("s = 1.5", "s"),
    ("domain = triangle", "domain"),
    ("g = wiggle", "g"),
    ("tol = -1", "tol"),
    ("quad = ultra", "quad"),
    ("ladder = 33, x", "ladder"),
])
def test_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        RunConfig.parse(text)
    assert info.value.key == key and str(info.value).startswith(key)


def test_missing_equals_reports_line():
    with pytest.raises(ConfigError) as info:
        RunConfig.parse("s 0.5")
    assert info.value.key == "line 1"


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "absent.txt")


@settings(max_examples=50, deadline=None)
@given(
    s=st.floats(0.01, 0.99),
    p=st.floats(1.01, 8.0),
    m=st.integers(3, 999),
    L=st.floats(0.1, 100.0),
    tol=st.none() | st.floats(1e-14, 1e-2),
    g=st.sampled_from(["0", "hat", "linear", "-1.5"]),
    ladder=st.lists(st.integers(3, 999), min_size=1, max_size=4).map(tuple),
    c=st.floats(-10, 10),
)
def test_canonical_text_round_trips(s, p, m, L, tol, g, ladder, c):
    cfg = RunConfig(s=s, p=p, m=m, L=L, tol=tol, g=g, ladder=ladder, g_params={"c": c})
    text = cfg.to_text()
    back = RunConfig.parse(text)
    assert back == cfg and back.to_text() == text


def test_builders():
    cfg = RunConfig.parse("m = 17\ng = hat\ng.c = 1\ng.w = 1\nf = 0.5\ndomain = ring\nn = 2")
    grid = cfg.grid()
    assert grid.m == 17 and grid.n == 2
    assert cfg.f_function(grid).values.max() == 0.5
    assert cfg.domain_mask(grid, exhaustion=False).count > 0
    assert cfg.quad_spec().name == "standard"
