import csv
import json
import math

import pytest

from sciglobe.cli import EXIT_CONFIG, EXIT_DATA, EXIT_OK, main
from sciglobe.geo import EARTH_RADIUS_KM

KM_PER_DEG = math.pi * EARTH_RADIUS_KM / 180.0

# city -> longitude on the equator, placed at a planted distance from "a".
CITIES = {"a": 0.0, "b": 250 / KM_PER_DEG, "c": 1200 / KM_PER_DEG, "d": 6000 / KM_PER_DEG}


def addr(city, country="X"):
    return {"city": city, "region": None, "country": country, "is_reprint": False}


def toy_corpus(path, year=2005):
    recs = [
        {"id": "1", "year": year, "doc_type": "article", "journal_id": "J", "subject_categories": ["C1"],
         "author_count": 1, "addresses": [addr("a")]},
        {"id": "2", "year": year, "doc_type": "article", "journal_id": "J", "subject_categories": ["C1"],
         "author_count": 2, "addresses": [addr("a"), addr("b")]},
        {"id": "3", "year": year, "doc_type": "review", "journal_id": "J", "subject_categories": ["C2"],
         "author_count": 3, "addresses": [addr("a"), addr("c", "Y")]},
        {"id": "4", "year": year, "doc_type": "article", "journal_id": "J", "subject_categories": ["C2"],
         "author_count": 4, "addresses": [addr("a"), addr("d", "Z")]},
        {"id": "5", "year": year, "doc_type": "editorial", "journal_id": "J", "subject_categories": ["C2"],
         "author_count": 4, "addresses": [addr("a")]},
    ]
    path.write_text("".join(json.dumps(r) + "\n" for r in recs))
    return path


def toy_gazetteer(path, skip=(), extra_rows=()):
    rows = ["key\tlat\tlon\tsource"]
    for city, lon in CITIES.items():
        if city in skip:
            continue
        country = {"c": "y", "d": "z"}.get(city, "x")
        rows.append(f"{city}||{country}\t0.0\t{lon!r}\tgoogle")
    rows += list(extra_rows)
    path.write_text("\n".join(rows) + "\n")
    return path


def toy_fields(path):
    path.write_text("category_code\tfield_code\tbroad_field_code\nC1\tF1\tNCM\nC2\tF2\tMLA\n")
    return path


@pytest.fixture
def toy(tmp_path):
    return {
        "corpus": str(toy_corpus(tmp_path / "corpus.jsonl")),
        "gazetteer": str(toy_gazetteer(tmp_path / "gaz.tsv")),
        "fields": str(toy_fields(tmp_path / "fields.tsv")),
        "cache": str(tmp_path / "cache.jsonl"),
        "out": tmp_path / "out",
    }


def base_args(t):
    return ["--corpus", t["corpus"], "--cache", t["cache"], "--out-dir", str(t["out"])]


def read_csv(path, delimiter=","):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh, delimiter=delimiter))


def test_geocode_full_gazetteer(toy, capsys):
    assert main(["geocode", *base_args(toy), "--gazetteer", toy["gazetteer"]]) == EXIT_OK
    out = capsys.readouterr().out
    assert "address coverage: 100.00%" in out
    assert "pending_review_strict: 0" in out and "pending_review_cursory: 0" in out


def test_geocode_missing_city(toy, tmp_path, capsys):
    gaz = toy_gazetteer(tmp_path / "partial.tsv", skip=("d",))
    assert main(["geocode", *base_args(toy), "--gazetteer", str(gaz)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "unknown: 1" in out
    cov = float(out.split("address coverage: ")[1].split("%")[0])
    assert cov < 100.0
    cache = [json.loads(line) for line in open(toy["cache"])]
    assert {r["key"]: r["status"] for r in cache}["d||z"] == "unknown"


def test_geocode_conflict_goes_to_cursory_queue(tmp_path):
    recs = [{"id": str(i), "year": 2005, "doc_type": "article", "addresses": [addr("a")]} for i in range(150)]
    corpus = tmp_path / "c.jsonl"
    corpus.write_text("".join(json.dumps(r) + "\n" for r in recs))
    gaz = toy_gazetteer(tmp_path / "g.tsv", extra_rows=[f"a||x\t0.0\t{120 / KM_PER_DEG!r}\tyahoo"])
    out = tmp_path / "out"
    assert main(["geocode", "--corpus", str(corpus), "--gazetteer", str(gaz),
                 "--cache", str(tmp_path / "cache.jsonl"), "--out-dir", str(out)]) == EXIT_OK
    queue = read_csv(out / "review_queue.tsv", "\t")
    assert len(queue) == 1
    assert queue[0]["status"] == "pending_review_cursory" and queue[0]["occurrences"] == "150"
    assert float(queue[0]["disagreement_km"]) == pytest.approx(120.0, abs=1e-3)

    # Reviewer confirms the second source; the entry becomes a manual resolution.
    lines = (out / "review_queue.tsv").read_text().splitlines()
    (out / "review_queue.tsv").write_text(lines[0] + "\n" + lines[1] + "yahoo\n")
    assert main(["apply-review", str(out / "review_queue.tsv"), "--cache", str(tmp_path / "cache.jsonl")]) == EXIT_OK
    entry = [json.loads(line) for line in open(tmp_path / "cache.jsonl") if '"a||x"' in line][0]
    assert entry["status"] == "resolved_manual" and entry["reviewed"]

    # A rerun keeps the reviewed decision.
    assert main(["geocode", "--corpus", str(corpus), "--gazetteer", str(gaz),
                 "--cache", str(tmp_path / "cache.jsonl"), "--out-dir", str(out)]) == EXIT_OK
    entry = [json.loads(line) for line in open(tmp_path / "cache.jsonl") if '"a||x"' in line][0]
    assert entry["status"] == "resolved_manual"


def test_missing_gazetteer_is_config_error(toy, capsys):
    assert main(["geocode", *base_args(toy), "--gazetteer", "/nonexistent.tsv"]) == EXIT_CONFIG
    assert "gazetteer file not found" in capsys.readouterr().err
    assert main(["geocode", *base_args(toy)]) == EXIT_CONFIG


def geocoded(toy):
    assert main(["geocode", *base_args(toy), "--gazetteer", toy["gazetteer"]]) == EXIT_OK
    return toy


def test_indicators_toy_values(toy):
    geocoded(toy)
    assert main(["indicators", *base_args(toy), "--fields", toy["fields"]]) == EXIT_OK
    rows = read_csv(toy["out"] / "indicators_all.csv")
    assert rows == [{"cell": "ALL", "year": "2005", "frac_pubs": "4.000000", "mgcd_km": "1862.5",
                     "pct_mldc": "75.00", "pct_ldc": "50.00", "pct_vldc": "25.00",
                     "pct_copub": "75.00", "pct_intl_copub": "50.00", "mean_authors": "2.50"}]
    countries = read_csv(toy["out"] / "indicators_country.csv")
    assert sum(float(r["frac_pubs"]) for r in countries) == pytest.approx(4.0)
    assert {r["cell"] for r in countries} == {"x", "y", "z"}
    fields = read_csv(toy["out"] / "indicators_field.csv")
    assert {r["cell"]: r["frac_pubs"] for r in fields} == {"F1": "2.000000", "F2": "2.000000"}
    meta = json.loads((toy["out"] / "indicators_meta.json").read_text())
    assert meta["ingest"]["rejected_type"] == 1


def test_indicators_byte_identical(toy, tmp_path):
    geocoded(toy)
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert main(["indicators", "--corpus", toy["corpus"], "--cache", toy["cache"],
                     "--fields", toy["fields"], "--out-dir", str(out)]) == EXIT_OK
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]


def test_indicators_empty_corpus_headers_only(toy, tmp_path, caplog):
    geocoded(toy)
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert main(["indicators", "--corpus", str(empty), "--cache", toy["cache"],
                 "--fields", toy["fields"], "--out-dir", str(toy["out"])]) == EXIT_OK
    text = (toy["out"] / "indicators_country.csv").read_text()
    assert text.strip() == "cell,year,frac_pubs,mgcd_km,pct_mldc,pct_ldc,pct_vldc,pct_copub,pct_intl_copub,mean_authors"
    assert "no admitted publications" in caplog.text


def test_indicators_without_cache_is_config_error(toy):
    assert main(["indicators", *base_args(toy)]) == EXIT_CONFIG


def write_series(path, pairs):
    path.write_text("year,value\n" + "".join(f"{y},{v}\n" for y, v in pairs))
    return str(path)


@pytest.mark.parametrize("v0,v1,y0,y1,rate", [
    (334, 1553, 1980, 2009, 5.4),
    (6031, 7008, 1980, 2009, 0.5),
    (1131, 1553, 2000, 2009, 3.6),
    (6554, 7008, 2000, 2009, 0.7),
])
def test_trend_published_series(tmp_path, v0, v1, y0, y1, rate):
    s = write_series(tmp_path / "s.csv", [(y0, v0), (y1, v1)])
    assert main(["trend", "--series", s, "--y0", str(y0), "--y1", str(y1), "--out-dir", str(tmp_path)]) == EXIT_OK
    g = json.loads((tmp_path / "growth.json").read_text())
    assert abs(round(g["annual_growth_rate_pct"], 1) - rate) <= 0.05


def test_trend_constant_and_doubling(tmp_path):
    s = write_series(tmp_path / "s.csv", [(2000 + i, 10.0) for i in range(10)])
    assert main(["trend", "--series", s, "--y0", "2000", "--y1", "2009", "--out-dir", str(tmp_path)]) == EXIT_OK
    g = json.loads((tmp_path / "growth.json").read_text())
    assert g["annual_growth"] == 0 and g["annual_growth_rate_pct"] == 0
    s = write_series(tmp_path / "s.csv", [(2000, 1.0), (2010, 2.0)])
    assert main(["trend", "--series", s, "--y0", "2000", "--y1", "2010", "--out-dir", str(tmp_path)]) == EXIT_OK
    g = json.loads((tmp_path / "growth.json").read_text())
    assert g["annual_growth_rate_pct"] == pytest.approx(7.18, abs=0.005)


def test_trend_missing_year_is_data_error(tmp_path):
    s = write_series(tmp_path / "s.csv", [(2000, 1.0)])
    assert main(["trend", "--series", s, "--y0", "2000", "--y1", "2009", "--out-dir", str(tmp_path)]) == EXIT_DATA


def test_trend_from_corpus(synthetic_dir, tmp_path):
    d = synthetic_dir
    args = ["--corpus", str(d / "corpus.jsonl"), "--cache", str(tmp_path / "cache.jsonl"), "--out-dir", str(tmp_path)]
    assert main(["geocode", *args, "--gazetteer", str(d / "gazetteer.tsv")]) == EXIT_OK
    assert main(["trend", *args, "--y0", "1980", "--y1", "2009"]) == EXIT_OK
    rows = read_csv(tmp_path / "trend.csv")
    assert [int(r["year"]) for r in rows] == list(range(1980, 2010))


def test_dispersion_command(toy):
    geocoded(toy)
    assert main(["dispersion", *base_args(toy), "--years", "2005,2006"]) == EXIT_OK
    rows = read_csv(toy["out"] / "dispersion.csv")
    assert rows[0]["year"] == "2005" and float(rows[0]["dispersion_km"]) > 0
    assert rows[1]["dispersion_km"] == ""


def test_map_classes_command(toy):
    geocoded(toy)
    assert main(["map-classes", *base_args(toy), "--window", "2004:2006"]) == EXIT_OK
    rows = read_csv(toy["out"] / "map_classes.csv")
    assert {r["class"] for r in rows} == {"white"}


def test_audit_round_trip(toy, capsys):
    geocoded(toy)
    assert main(["audit-sample", *base_args(toy), "--n", "3", "--seed", "5"]) == EXIT_OK
    sample = toy["out"] / "audit_sample.tsv"
    first = sample.read_bytes()
    assert main(["audit-sample", *base_args(toy), "--n", "3", "--seed", "5"]) == EXIT_OK
    assert sample.read_bytes() == first
    rows = read_csv(sample, "\t")
    lines = ["key\tlat\tlon\tverified_lat\tverified_lon"]
    for i, r in enumerate(rows):
        lon = float(r["lon"]) + (1.0 if i == 0 else 0.0)
        lines.append(f"{r['key']}\t{r['lat']}\t{r['lon']}\t{r['lat']}\t{lon}")
    sample.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["audit-compare", str(sample), *base_args(toy)]) == EXIT_OK
    assert "more than 50 km off: 1" in capsys.readouterr().out
    assert main(["audit-sample", *base_args(toy), "--n", "99"]) == EXIT_DATA


def test_schema_check_command(toy, tmp_path, capsys):
    assert main(["schema-check", toy["corpus"]]) == EXIT_OK
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": 1}\n')
    assert main(["schema-check", str(bad)]) == EXIT_DATA
    assert "line 1" in capsys.readouterr().out


def test_gen_synthetic_deterministic(tmp_path):
    for name in ("a", "b"):
        assert main(["gen-synthetic", "--out-dir", str(tmp_path / name), "--n-pubs", "200", "--seed", "3"]) == EXIT_OK
    for f in ("corpus.jsonl", "gazetteer.tsv", "fields.tsv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_config_file_and_override(toy, tmp_path):
    geocoded(toy)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"corpus": toy["corpus"], "cache": toy["cache"], "fields": toy["fields"],
                               "out_dir": str(tmp_path / "from_cfg"), "partitions": ["all"]}))
    assert main(["indicators", "--config", str(cfg)]) == EXIT_OK
    assert (tmp_path / "from_cfg" / "indicators_all.csv").exists()
    assert main(["indicators", "--config", str(cfg), "--out-dir", str(tmp_path / "flag")]) == EXIT_OK
    assert (tmp_path / "flag" / "indicators_all.csv").exists()


@pytest.mark.parametrize("cfg", [{"bogus": 1}, {"partitions": ["planet"]}, {"year_min": 2010, "year_max": 2000}])
def test_bad_config_exit_code(tmp_path, cfg):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["indicators", "--config", str(path)]) == EXIT_CONFIG


def test_fixed_journals_and_fractional_flags(toy):
    geocoded(toy)
    assert main(["indicators", *base_args(toy), "--fields", toy["fields"], "--fixed-journals", "2005:2005",
                 "--fractional", "equal-country", "--partitions", "all,country"]) == EXIT_OK
    rows = read_csv(toy["out"] / "indicators_all.csv")
    assert rows[0]["frac_pubs"] == "4.000000"
