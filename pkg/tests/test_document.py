from __future__ import annotations

import json
from pathlib import Path

import pytest

from ugfrel.components import TABLE_MASS_TOLERANCE
from ugfrel.document import (
    ConfigDocumentError,
    load_document,
    load_system_config,
    parse_document,
    to_system_config,
)
from ugfrel.loadcsv import LoadSeriesError
from ugfrel.stochastic import BetaParams, FixedAvailability, TimeUnit, TwoStateRates

DATA = Path(__file__).resolve().parents[1] / "data"


def _doc(**sections) -> dict:
    doc = {"version": 1, "load": {"table": [[100.0, 1.0]]}}
    doc.update(sections)
    return doc


def test_case_study_documents_load():
    exact = load_system_config(DATA / "case34_exact.json")
    assert exact.solar_count == 5 and exact.wind_count == 5
    assert exact.solar.mech == TwoStateRates(0.0005, 0.013, TimeUnit.HOUR)
    assert exact.transformer.mech.per is TimeUnit.YEAR
    assert exact.load.n_hours == 8736
    assert exact.horizon == 8736
    assert exact.strict_loss is True

    rounded = load_system_config(DATA / "case34_paper_rounded.json")
    assert rounded.ev.mech == FixedAvailability(0.99)
    assert rounded.horizon_hours == 8736
    assert rounded.load.table[0] == (2045.0, 0.044)
    assert rounded.name.startswith("34-node feeder")


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigDocumentError) as err:
        parse_document(json.dumps(_doc(transformer={"rated_kw": 10, "mechanical": {"availability": 1}, "colour": 1})))
    assert "transformer.colour" in str(err.value)


def test_version_is_required():
    doc = _doc()
    doc["version"] = 2
    with pytest.raises(ConfigDocumentError):
        parse_document(json.dumps(doc))


def test_mechanical_forms():
    rates = parse_document(
        json.dumps(_doc(transformer={"rated_kw": 10, "mechanical": {"failure_rate": 1, "repair_rate": 9, "per": "year"}}))
    )
    fixed = parse_document(json.dumps(_doc(transformer={"rated_kw": 10, "mechanical": {"availability": 0.9}})))
    a = to_system_config(rates).transformer.mech
    b = to_system_config(fixed).transformer.mech
    assert isinstance(a, TwoStateRates) and a.availability == pytest.approx(0.9)
    assert isinstance(b, FixedAvailability) and b.availability == 0.9
    with pytest.raises(ConfigDocumentError):
        parse_document(json.dumps(_doc(transformer={"rated_kw": 10, "mechanical": {"availability": 1.5}})))


def test_beta_moment_form():
    solar = {
        "count": 1,
        "n_modules": 10,
        "mechanical": {"availability": 1.0},
        "beta": {"mean": 0.5, "variance": 0.05},
        "n_states": 5,
        "panel": {"k_v": 0.12, "k_i": 0.05, "i_sc": 8.5, "v_oc": 37.5, "i_mpp": 8.0, "v_mpp": 30.0, "n_ot": 45, "t_a": 25},
    }
    config = to_system_config(parse_document(json.dumps(_doc(solar=solar))))
    assert config.solar.irradiance.alpha == pytest.approx(2.0)
    assert config.solar.irradiance.beta == pytest.approx(2.0)

    solar["beta"] = {"alpha": 2.0, "beta": 3.0}
    config = to_system_config(parse_document(json.dumps(_doc(solar=solar))))
    assert config.solar.irradiance == BetaParams(2.0, 3.0)

    solar["beta"] = {"alpha": 2.0, "mean": 0.5}
    with pytest.raises(ConfigDocumentError):
        parse_document(json.dumps(_doc(solar=solar)))


def test_source_must_be_unique():
    wind = {"count": 1, "mechanical": {"availability": 1.0}}
    with pytest.raises(ConfigDocumentError):
        parse_document(json.dumps(_doc(wind=wind)))
    with pytest.raises(ConfigDocumentError):
        parse_document(json.dumps({"version": 1, "load": {"csv": "a.csv", "table": [[1, 1]]}}))


def test_relative_csv_and_override(tmp_path: Path):
    (tmp_path / "series.csv").write_text("kw\n1\n2\n3\n4\n")
    (tmp_path / "other.csv").write_text("kw\n5\n5\n5\n")
    doc_path = tmp_path / "system.json"
    doc_path.write_text(json.dumps({"version": 1, "load": {"csv": "series.csv", "n_states": 2}}))

    config = load_system_config(doc_path)
    assert config.load.hourly_kw.tolist() == [1.0, 2.0, 3.0, 4.0]
    assert config.load.n_states == 2

    overridden = load_system_config(doc_path, load_csv=tmp_path / "other.csv", strict_loss=False)
    assert overridden.load.hourly_kw.tolist() == [5.0, 5.0, 5.0]
    assert overridden.strict_loss is False


def test_missing_files(tmp_path: Path):
    with pytest.raises(ConfigDocumentError):
        load_document(tmp_path / "absent.json")
    doc_path = tmp_path / "system.json"
    doc_path.write_text(json.dumps({"version": 1, "load": {"csv": "absent.csv"}}))
    with pytest.raises(LoadSeriesError):
        load_system_config(doc_path)


def test_table_mass_tolerance_is_configurable():
    wind = {"count": 1, "mechanical": {"availability": 1.0}, "table": [[4, 0.5, 1.0], [12, 0.47, 2.0]]}
    doc = parse_document(json.dumps(_doc(wind=wind)))
    tight = to_system_config(doc, table_mass_tolerance=0.001)
    loose = to_system_config(doc, table_mass_tolerance=TABLE_MASS_TOLERANCE * 5)
    assert tight.wind.table.mass_tolerance == 0.001
    assert loose.wind.table.distribution().state_probs.sum() == pytest.approx(1.0)


def test_table_sources_reject_density_settings():
    wind = {"count": 1, "mechanical": {"availability": 1.0}, "table": [[4, 1.0, 1.0]], "max": 30.0}
    with pytest.raises(ConfigDocumentError, match="max"):
        parse_document(json.dumps(_doc(wind=wind)))
    solar = {"count": 1, "n_modules": 1, "mechanical": {"availability": 1.0}, "table": [[0.5, 1.0, 0.04]], "max": 1.0}
    with pytest.raises(ConfigDocumentError, match="max"):
        parse_document(json.dumps(_doc(solar=solar)))


@pytest.mark.parametrize(
    "markov",
    [
        {"rates": [[0, 1], [1]], "per": "year", "capacity_fractions": [1.0, 0.0]},
        {"rates": [], "per": "year", "capacity_fractions": []},
        {"rates": [[0, 1], [1, 0]], "per": "year", "capacity_fractions": [1.0]},
    ],
)
def test_markov_shapes_are_validated(markov):
    with pytest.raises(ConfigDocumentError):
        parse_document(json.dumps(_doc(transformer={"rated_kw": 100.0, "markov": markov})))
