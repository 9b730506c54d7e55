import sys
from concurrent.futures import ThreadPoolExecutor

import pytest

from cgfeedback.backend import (
    MINI_CATALOG,
    BackendConfigError,
    ExternalBackend,
    MiniBackend,
    PassCatalog,
    check_compilable,
    compile,
    source_count,
    validate_pass_list,
)
from cgfeedback.irtext import count_instructions_text
from cgfeedback.mir import generate_corpus, parse_module

from conftest import FIXTURES

MINIOPT_ARGS = "-m cgfeedback.miniopt {input} --passes={passes}"


def test_validate_pass_list():
    assert validate_pass_list([], MINI_CATALOG).valid
    assert validate_pass_list(["constfold", "dce"], MINI_CATALOG).valid
    v = validate_pass_list(["constfold", "licm", "gvn", "licm"], MINI_CATALOG)
    assert not v.valid and v.unknown_names == ("licm", "gvn")
    v = validate_pass_list(["dce"] * 17, MINI_CATALOG)
    assert not v.valid and v.too_long and v.unknown_names == ()


def test_compile_identity_pipeline(backend, diamond):
    r = compile(diamond, [], backend)
    assert r.ok and r.inst_count == 7 and r.error_message is None
    assert parse_module(r.compiled_ir) == parse_module(diamond)


def test_compile_witness(backend, witness):
    r = backend.compile(witness, ["constfold", "dce"])
    assert r.ok and r.inst_count == 1
    assert r.inst_count == count_instructions_text(r.compiled_ir)


def test_compile_broken_text(backend):
    r = backend.compile("func f( {\n", ["dce"])
    assert not r.ok and r.compiled_ir is None and r.inst_count is None
    assert r.error_message.startswith("line 1")


def test_compile_invalid_pass_list(backend, witness):
    r = backend.compile(witness, ["licm"])
    assert not r.ok and "licm" in r.error_message


def test_check_compilable(backend, diamond):
    assert check_compilable(diamond, backend).ok
    r = check_compilable("", backend)
    assert not r.ok and r.message == "empty module"
    r = check_compilable("func f() {\nentry:\n  ret i32 %x\n}\n", backend)
    assert not r.ok and "%x" in r.message


def test_source_count(backend, diamond):
    assert source_count(diamond, backend) == 7
    with pytest.raises(ValueError):
        source_count("garbage", backend)


def test_mini_counts_agree_with_parser(backend):
    for _, text in generate_corpus(9, 30):
        r = backend.compile(text, ["constfold", "cse", "dce"])
        assert r.inst_count == parse_module(r.compiled_ir).instruction_count()


def test_concurrent_compiles_are_consistent(backend):
    corpus = generate_corpus(13, 40)
    serial = [backend.compile(t, ["peephole", "dce"]) for _, t in corpus]
    with ThreadPoolExecutor(8) as pool:
        parallel = list(pool.map(lambda ex: backend.compile(ex[1], ["peephole", "dce"]), corpus))
    assert serial == parallel


# -- catalog files -----------------------------------------------------------------

def test_catalog_from_file():
    cat = PassCatalog.from_file(FIXTURES / "mini.catalog")
    assert cat.reference_pipeline == MINI_CATALOG.reference_pipeline
    assert cat.names == MINI_CATALOG.names


def test_catalog_missing_file_names_path(tmp_path):
    with pytest.raises(BackendConfigError, match="nope.txt"):
        PassCatalog.from_file(tmp_path / "nope.txt")


def test_catalog_rejects_reference_outside_names():
    with pytest.raises(BackendConfigError):
        PassCatalog(frozenset({"dce"}), ("constfold",))


# -- external adapter ----------------------------------------------------------------

@pytest.fixture
def external():
    return ExternalBackend(sys.executable, MINI_CATALOG, MINIOPT_ARGS, timeout=30)


def test_external_matches_mini(external, backend):
    for _, text in generate_corpus(21, 5):
        for passes in ([], ["dce"], list(MINI_CATALOG.reference_pipeline)):
            assert external.compile(text, passes) == backend.compile(text, passes)


def test_external_failure_first_diagnostic(external):
    r = external.compile("func f() {\nentry:\n  ret i32 %x\n}\n", ["dce"])
    assert not r.ok and r.error_message == "error: use of undefined register %x"
    c = external.check_compilable("func f() {\nentry:\n  ret i32 %x\n}\n")
    assert not c.ok and "%x" in c.message
    assert external.check_compilable("").message == "empty module"


def test_external_timeout(tmp_path, witness):
    script = tmp_path / "slow.py"
    script.write_text("import time\ntime.sleep(10)\n")
    ext = ExternalBackend(sys.executable, MINI_CATALOG, f"{script} {{input}}", timeout=0.5)
    r = ext.compile(witness, ["dce"])
    assert not r.ok and r.error_message == "timeout"


def test_external_nonzero_exit(tmp_path, witness):
    script = tmp_path / "fail.py"
    script.write_text("import sys\nsys.stderr.write('\\nboom: bad pass\\nmore\\n')\nsys.exit(3)\n")
    ext = ExternalBackend(sys.executable, MINI_CATALOG, f"{script} {{input}}")
    r = ext.compile(witness, ["dce"])
    assert not r.ok and r.error_message == "boom: bad pass"


def test_external_missing_binary():
    with pytest.raises(BackendConfigError, match="no-such-opt"):
        ExternalBackend("/no/such/dir/no-such-opt", MINI_CATALOG)


def test_external_cleans_temp_files(tmp_path, monkeypatch, external, witness):
    monkeypatch.setenv("TMPDIR", str(tmp_path))
    import tempfile
    monkeypatch.setattr(tempfile, "tempdir", None)
    assert external.compile(witness, ["dce"]).ok
    assert list(tmp_path.iterdir()) == []
