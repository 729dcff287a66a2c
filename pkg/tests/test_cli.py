import json
import os

import pytest

from app.main import main
from app.models.hierarchy import MemoryHierarchy
from app.schemas.engine import EngineConfig
from app.services.bench_service import CSV_HEADER, BenchService
from app.services.ingest_service import IngestService
from app.services.snapshot_service import SnapshotService


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    for name in list(os.environ):
        if name.startswith("CAM_"):
            monkeypatch.delenv(name)
    monkeypatch.chdir(tmp_path)


@pytest.fixture(scope="module")
def small_corpus():
    return BenchService.synthetic_corpus(80, seed=7)


@pytest.fixture
def corpus_file(tmp_path, small_corpus):
    path = tmp_path / "docs.jsonl"
    path.write_text("\n".join(d.model_dump_json() for d in small_corpus.documents) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def memory_file(tmp_path, corpus_file, capsys):
    path = tmp_path / "mem.snap"
    code = main(["ingest", "--input", str(corpus_file), "--stub-providers", "--chunk-size", "16",
                 "--batch-size", "20", "--out", str(path)])
    assert code == 0
    capsys.readouterr()
    return path

# ==========================================
# 1. TEST INGEST
# ==========================================

def test_ingest_writes_snapshot_and_report(tmp_path, corpus_file, capsys):
    """Test the happy path"""
    out = tmp_path / "mem.snap"
    code = main(["ingest", "--input", str(corpus_file), "--stub-providers", "--chunk-size", "16",
                 "--batch-size", "50", "--out", str(out)])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["batch_chunks"] == 80
    assert SnapshotService.load(str(out)).node_count() >= 80

def test_ingest_without_api_key(corpus_file, capsys):
    """Test the remote provider needs its key"""
    code = main(["ingest", "--input", str(corpus_file)])
    assert code == 2
    assert "CAM_API_KEY" in capsys.readouterr().err

def test_ingest_rejects_alpha_out_of_range(corpus_file, capsys):
    """Test flag validation names the bound"""
    code = main(["ingest", "--input", str(corpus_file), "--stub-providers", "--alpha", "1.5"])
    assert code == 2
    assert "[0, 1]" in capsys.readouterr().err

def test_ingest_missing_input(tmp_path, capsys):
    """Test a nonexistent input path"""
    code = main(["ingest", "--input", str(tmp_path / "nope.jsonl"), "--stub-providers"])
    assert code == 1
    assert "input not found" in capsys.readouterr().err

def test_ingest_continues_from_snapshot(tmp_path, memory_file, capsys):
    """Test --snapshot then --out with one more document"""
    extra = tmp_path / "extra.txt"
    extra.write_text(" ".join(["alpha"] * 40), encoding="utf-8")
    out = tmp_path / "more.snap"
    code = main(["ingest", "--input", str(extra), "--stub-providers", "--chunk-size", "16",
                 "--snapshot", str(memory_file), "--out", str(out)])
    assert code == 0
    grown = SnapshotService.load(str(out))
    assert len(grown.levels[0].graph) == len(SnapshotService.load(str(memory_file)).levels[0].graph) + 3

def test_ingest_continues_with_the_snapshot_dimension(tmp_path, corpus_file, monkeypatch, capsys):
    """Test stub vectors follow the stored embedding_dim, not the default"""
    first = tmp_path / "small.snap"
    monkeypatch.setenv("CAM_ENGINE__EMBEDDING_DIM", "64")
    assert main(["ingest", "--input", str(corpus_file), "--stub-providers", "--chunk-size", "16",
                 "--out", str(first)]) == 0
    monkeypatch.delenv("CAM_ENGINE__EMBEDDING_DIM")

    extra = tmp_path / "extra.txt"
    extra.write_text(" ".join(["beta"] * 16), encoding="utf-8")
    out = tmp_path / "grown.snap"
    code = main(["ingest", "--input", str(extra), "--stub-providers", "--chunk-size", "16",
                 "--snapshot", str(first), "--out", str(out)])
    assert code == 0
    grown = SnapshotService.load(str(out))
    assert grown.config.embedding_dim == 64
    assert len(grown.levels[0].graph) == len(SnapshotService.load(str(first)).levels[0].graph) + 1

def test_ingest_document_scope(tmp_path, capsys):
    """Test one snapshot per document"""
    docs = tmp_path / "two.jsonl"
    docs.write_text(
        json.dumps({"doc_id": "first", "text": "alpha " * 40}) + "\n"
        + json.dumps({"doc_id": "second", "text": "beta " * 40}) + "\n",
        encoding="utf-8",
    )
    out_dir = tmp_path / "memories"
    code = main(["ingest", "--input", str(docs), "--stub-providers", "--chunk-size", "16",
                 "--scope", "document", "--out", str(out_dir)])
    assert code == 0
    assert sorted(os.listdir(out_dir)) == ["first.snap", "second.snap"]
    assert set(json.loads(capsys.readouterr().out)) == {"first", "second"}

# ==========================================
# 2. TEST QUERY
# ==========================================

def test_query_answers_from_topic_chunks(memory_file, small_corpus, capsys):
    """Test an alpha query returns alpha chunk text"""
    code = main(["query", "alpha alpha alpha", "--snapshot", str(memory_file), "--stub-providers"])
    assert code == 0
    answer = capsys.readouterr().out
    chunks = IngestService.split_documents(small_corpus.documents, small_corpus.chunk_size)
    alpha_texts = [c.text for c in chunks if small_corpus.topic_of[c.node_id] == "alpha"]
    assert any(text in answer for text in alpha_texts)

def test_query_explain_prints_trace(memory_file, capsys):
    """Test --explain adds the trace JSON"""
    code = main(["query", "beta beta", "--snapshot", str(memory_file), "--stub-providers", "--explain"])
    assert code == 0
    out = capsys.readouterr().out
    trace = json.loads(out[out.index("{"):])
    assert trace["query"] == "beta beta"
    assert trace["hops_used"] <= 3

def test_query_rejects_top_s_zero(memory_file, capsys):
    """Test --top-s validation"""
    code = main(["query", "alpha", "--snapshot", str(memory_file), "--stub-providers", "--top-s", "0"])
    assert code == 2

def test_query_on_empty_memory(tmp_path, capsys):
    """Test exit 3 and the message"""
    path = tmp_path / "empty.snap"
    SnapshotService.save(MemoryHierarchy(EngineConfig()), str(path))
    code = main(["query", "alpha", "--snapshot", str(path), "--stub-providers"])
    assert code == 3
    assert "empty memory" in capsys.readouterr().err

# ==========================================
# 3. TEST STATS AND SNAPSHOT
# ==========================================

def test_stats_prints_levels(memory_file, capsys):
    """Test per-level counts"""
    assert main(["stats", "--snapshot", str(memory_file)]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["levels"][0]["nodes"] == 80
    assert stats["level_count"] == len(stats["levels"])

def test_snapshot_resave_is_identical(tmp_path, memory_file, capsys):
    """Test verify plus canonical re-save"""
    copy = tmp_path / "copy.snap"
    assert main(["snapshot", "--snapshot", str(memory_file), "--out", str(copy)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["format_version"] == 1
    assert info["written"] == str(copy)
    assert copy.read_bytes() == memory_file.read_bytes()

def test_snapshot_corrupted_file(tmp_path, memory_file, capsys):
    """Test a damaged snapshot fails with a diagnostic"""
    broken = tmp_path / "broken.snap"
    broken.write_bytes(memory_file.read_bytes()[:-20])
    assert main(["snapshot", "--snapshot", str(broken)]) == 1
    assert "error:" in capsys.readouterr().err

# ==========================================
# 4. TEST BENCH
# ==========================================

def test_bench_prints_csv(capsys):
    """Test header plus one row per batch size"""
    code = main(["bench", "--chunks", "40", "--batch-sizes", "10,20", "--seed", "3"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == CSV_HEADER
    assert [line.split(",")[0] for line in lines[1:]] == ["10", "20"]

@pytest.mark.parametrize("sizes", ["a,b", "0,5", ""])
def test_bench_rejects_bad_batch_sizes(sizes, capsys):
    """Test --batch-sizes validation"""
    assert main(["bench", "--chunks", "10", "--batch-sizes", sizes]) == 2

def test_bench_has_no_chunk_size_flag(capsys):
    """Test the synthetic corpus chunk size cannot be overridden"""
    with pytest.raises(SystemExit) as excinfo:
        main(["bench", "--chunks", "10", "--chunk-size", "16"])
    assert excinfo.value.code == 2
    assert "--chunk-size" in capsys.readouterr().err

def test_version_flag(capsys):
    """Test --version exits cleanly"""
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert "cam" in capsys.readouterr().out
