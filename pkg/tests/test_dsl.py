from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hubgraph.assemble import assemble_lp
from hubgraph.blocks import annualize_capex
from hubgraph.case.reference import reference_system
from hubgraph.dsl import DslError, format_ast, load_model, parse_source, resolve, tokenize
from hubgraph.dsl.lexer import EOF, NUMBER, escape, unescape

import fuzz
from golden_runner import GOLDEN, corpus, render

BUNDLED = Path(__file__).resolve().parents[1] / "src" / "hubgraph" / "models" / "reference.hub"


def model(text, tmp_path, name="m.hub", scenario=None):
    p = tmp_path / name
    p.write_text(text)
    return load_model(p, scenario)


def diagnostics(text, tmp_path, scenario=None):
    with pytest.raises(DslError) as err:
        model(text, tmp_path, scenario=scenario)
    return [d.format() for d in err.value.errors]


# -- lexer --------------------------------------------------------------------

def test_horizon_tokens():
    toks = tokenize("horizon { T = 24; dt = 1; years = 1; }")
    assert toks[-1].kind == EOF
    body = toks[:-1]
    # keyword, brace, three "key = number ;" groups and the closing brace
    assert len(body) == 15
    assert body[-1].lexeme == "}"


def test_number_lexeme_kept_verbatim():
    toks = tokenize("node pv : conversion { capex = 380.0; }")
    nums = [t for t in toks if t.kind == NUMBER]
    assert [t.lexeme for t in nums] == ["380.0"]


def test_illegal_character_position():
    with pytest.raises(DslError) as err:
        tokenize("@")
    d = err.value.errors[0]
    assert (d.span.line, d.span.col) == (1, 1)
    assert "illegal character" in d.message


def test_positions_are_one_based_and_skip_comments():
    toks = tokenize("# note\n  node x")
    assert [(t.lexeme, t.line, t.col) for t in toks[:-1]] == [("node", 2, 3), ("x", 2, 8)]


@given(st.text(max_size=40))
def test_string_escape_round_trip(s):
    toks = tokenize(escape(s))
    assert len(toks) == 2 and unescape(toks[0].lexeme) == s


# -- parser -------------------------------------------------------------------

MINIMAL = """horizon { T = 3; }
node gen : conversion { outputs = [power]; capex = 1; lifetime = 10; }
hyperedge demand : conservation { tail = [gen.power]; withdrawal = 1; }
"""


def test_minimal_file_structure():
    ast = parse_source(MINIMAL)
    assert len(ast.nodes) == 1 and len(ast.hyperedges) == 1
    assert ast.horizon is not None
    assert [type(d).__name__ for d in ast.declarations] == ["HorizonDecl", "NodeDecl", "HyperedgeDecl"]


def test_duplicate_horizon_reported_at_second():
    with pytest.raises(DslError) as err:
        parse_source("horizon { T = 1; }\n\nhorizon { T = 2; }\n")
    (d,) = err.value.errors
    assert "duplicate horizon declaration" in d.message and d.span.line == 3


def test_missing_semicolon_recovers_at_next_declaration():
    src = "horizon { T = 1; }\nnode a : conversion { capex = 1\n lifetime = 2; }\nnode b : conversion { capex = ; }\n"
    with pytest.raises(DslError) as err:
        parse_source(src)
    errs = err.value.errors
    assert len(errs) == 2
    assert errs[0].message == "expected ';', found 'lifetime'" and (errs[0].span.line, errs[0].span.col) == (3, 2)
    assert errs[1].span.line == 4


@pytest.mark.parametrize("src, fragment", [
    ("horizon { T = 1;", "unterminated block"),
    ("node { }", "expected <node name>"),
    ("node a conversion { }", "expected ':'"),
    ("node a : { }", "expected <template kind>"),
    ("node a : conversion x", "expected '{'"),
    ("node a : conversion { b c; }", "expected one of '=', '.'"),
    ("node a : conversion { b = ; }", "expected one of <number>"),
    ("node a : conversion { b = -x; }", "expected <number>"),
    ("node a : conversion { b = [1 2]; }", "expected one of ',', ']'"),
    ("node a : conversion { b = [1, 2; }", "expected one of ',', ']'"),
    ("node a : conversion { b.= 1; }", "expected <identifier>"),
    ("series = csv(1);", "expected <series name>"),
    ("series s csv(1);", "expected '='"),
    ("series s = 3;", "expected <series source>"),
    ("series s = csv 1;", "expected '('"),
    ("series s = csv(1 2);", "expected one of ',', ')'"),
    ("series s = csv(a = 1, 2);", "positional argument after keyword"),
    ("series s = csv(1)", "expected ';'"),
    ("hyperedge e : { }", "expected <template kind>"),
    ("scenario s : { }", "expected <base scenario name>"),
    ("scenario s { a : 1; }", "expected one of '=', '*=', '.'"),
    ("; ", "expected one of 'horizon'"),
    ("wacc 0.07;", "expected one of '=', '.'"),
    ("node a : conversion { b = " + "[" * 40 + "]" * 40 + "; }", "nest deeper"),
])
def test_every_production_has_a_positioned_error(src, fragment):
    with pytest.raises(DslError) as err:
        parse_source(src)
    assert any(fragment in d.message for d in err.value.errors), err.value
    assert all(d.span is not None for d in err.value.errors)


def test_diagnostic_format(tmp_path):
    with pytest.raises(DslError) as err:
        model("horizon { T = 1 }", tmp_path)
    assert str(err.value).startswith(str(tmp_path / "m.hub") + ":1:17: error: ")


# -- resolver -----------------------------------------------------------------

METHANATION = """horizon { T = 4; }
wacc = 0.07;
node methanation : conversion {
    inputs = [hydrogen, co2];
    outputs = [methane];
    reference = methane;
    sizing = methane;
    ratio.hydrogen = 0.5;
    ratio.co2 = 2.75;
    mu = 1.0;
    delta = 0.0;
    capex = 735.0;
    fom = 29.4;
    lifetime = 30;
}
"""


def test_methanation_node_spec(tmp_path):
    m = model(METHANATION, tmp_path)
    spec = m.graph.node("methanation").source
    assert spec.mu == 1.0 and spec.delta_plus == 0.0 and spec.delta_minus == 0.0
    assert spec.cost.capex == 735.0 and spec.cost.fom == 29.4
    assert spec.cost.annualized == annualize_capex(735.0, 30, 0.07)
    assert spec.phi == {"hydrogen": 2.0, "co2": 1 / 2.75}


def test_missing_external_message(tmp_path):
    src = """horizon { T = 2; }
wacc = 0;
node battery : storage { commodity = power; stock.capex = 1; stock.lifetime = 1; }
node pv : conversion { outputs = [power]; capex = 1; lifetime = 1; }
hyperedge bus : conservation { tail = [pv.power, battery.discharge]; head = [battery.charging]; }
"""
    (msg,) = diagnostics(src, tmp_path)
    assert msg.endswith("error: no external variable 'charging' on node 'battery'")
    assert ":5:" in msg


def test_series_length_mismatch(tmp_path):
    (tmp_path / "cf.csv").write_text("v\n" + "\n".join("0.5" for _ in range(23)) + "\n")
    src = 'horizon { T = 24; }\nwacc = 0;\nseries s = csv("cf.csv", "v");\n'
    (msg,) = diagnostics(src, tmp_path)
    assert "series length 23 ≠ horizon 24" in msg


def test_series_paths_resolve_relative_to_model(tmp_path):
    sub = tmp_path / "sub"
    sub.mkdir()
    (sub / "cf.csv").write_text("v\n0.1\n0.2\n")
    src = """horizon { T = 2; }
wacc = 0;
series s = csv("cf.csv", "v");
node pv : conversion { outputs = [p]; availability = s; capex = 1; lifetime = 1; }
hyperedge d : conservation { tail = [pv.p]; withdrawal = 0.05; }
"""
    m = model(src, sub)
    assert np.array_equal(m.series["s"], [0.1, 0.2])


def test_unknown_parameter_is_never_silently_defaulted(tmp_path):
    src = METHANATION.replace("mu = 1.0;", "muu = 1.0;")
    (msg,) = diagnostics(src, tmp_path)
    assert "unknown parameter 'muu'" in msg and "did you mean 'mu'" in msg


def test_missing_required_lists_parameters(tmp_path):
    src = "horizon { T = 2; }\nwacc = 0;\nnode a : conversion { outputs = [p]; }\n"
    (msg,) = diagnostics(src, tmp_path)
    assert "missing required parameter(s): capex, lifetime" in msg


def test_missing_model_file(tmp_path):
    with pytest.raises(DslError, match="model file not found"):
        load_model(tmp_path / "nope.hub")


def test_zero_financing_flag(tmp_path):
    m = model(METHANATION.replace("wacc = 0.07;", "wacc = zero_financing;"), tmp_path)
    assert m.wacc == 0.0
    assert m.graph.node("methanation").source.cost.annualized == 735.0 / 30


def test_per_node_wacc_override(tmp_path):
    m = model(METHANATION.replace("lifetime = 30;", "lifetime = 30; wacc = 0.1;"), tmp_path)
    assert m.graph.node("methanation").source.cost.annualized == annualize_capex(735.0, 30, 0.1)


def test_scenario_chain(tmp_path):
    src = METHANATION + """scenario half { methanation.capex *= 0.5; }
scenario quarter : half { methanation.capex *= 0.5; wacc = zero_financing; }
"""
    q = model(src, tmp_path, scenario="quarter").graph.node("methanation").source.cost
    assert q.capex == 735.0 / 4 and q.annualized == 735.0 / 4 / 30
    with pytest.raises(DslError, match="unknown scenario 'third'"):
        model(src, tmp_path, scenario="third")


def test_resolve_accepts_ast_and_base_dir(tmp_path):
    graph = resolve(parse_source(MINIMAL), tmp_path)
    assert [n.name for n in graph.nodes] == ["gen"]


# -- bundled model and determinism --------------------------------------------

def test_bundled_model_matches_python_case_builder():
    from_file = assemble_lp(load_model(BUNDLED).graph)
    from_code = assemble_lp(reference_system(horizon=24))
    assert from_file.fingerprint() == from_code.fingerprint()


def test_same_bytes_same_graph(tmp_path):
    a = assemble_lp(model(MINIMAL, tmp_path, "a.hub").graph).fingerprint()
    b = assemble_lp(model(MINIMAL, tmp_path, "b.hub").graph).fingerprint()
    assert a == b


def test_bundled_scenarios_resolve():
    names = [s.name for s in parse_source(BUNDLED.read_text()).scenarios]
    assert {"solar_only", "flexibility", "zero_financing", "short_voyage"} <= set(names)
    for name in names:
        load_model(BUNDLED, name)


# -- golden corpus ------------------------------------------------------------

def test_corpus_size_and_coverage():
    names = corpus()
    assert len(names) >= 20
    text = "".join((GOLDEN / n).read_text() for n in names)
    for kind in (": conversion", ": storage", ": conservation"):
        assert kind in text


@pytest.mark.parametrize("name", corpus())
def test_golden_output_is_byte_stable(name):
    expected = (GOLDEN / (name[:-4] + ".expected")).read_bytes()
    assert render(name).encode("utf-8") == expected


@pytest.mark.parametrize("name", corpus() + ["<bundled>"])
def test_format_round_trip(name):
    text = BUNDLED.read_text() if name == "<bundled>" else (GOLDEN / name).read_text()
    try:
        ast = parse_source(text)
    except DslError:
        pytest.skip("file is a syntax-error fixture")
    printed = format_ast(ast)
    again = parse_source(printed)
    assert again == ast
    assert format_ast(again) == printed


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fuzzed_inputs_never_crash(seed):
    count, crashes = fuzz.run(3, seed)
    assert crashes == []
