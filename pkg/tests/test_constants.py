"""Frozen-constant payload shape and the regression guard."""

import math

import pytest

from anisowave import constants as C


def test_frozen_payload_shape():
    payload = C.load_constants()
    assert set(payload["values"]) == set(C.CONSTANT_NAMES)
    for name, value in payload["values"].items():
        assert math.isfinite(value) and value > 0, name
    assert payload["seed"] == C.CALIBRATION_SEED
    assert payload["slack"] == C.DEFAULT_SLACK
    assert payload["fast"] is False
    assert set(payload["ensembles"]) == {
        "weighted_bochner", "sobolev", "exterior", "interior",
        "measure", "chi"}


def test_assert_no_regression_pass():
    stored = {"C_a": 2.0, "C_b": 10.0}
    headroom = C.assert_no_regression({"C_a": 2.05, "C_b": 9.0}, stored)
    assert headroom["C_a"] == pytest.approx(2.1 - 2.05)
    assert headroom["C_b"] == pytest.approx(1.5)


def test_assert_no_regression_raises():
    stored = {"C_a": 2.0}
    with pytest.raises(ValueError, match="regressed"):
        C.assert_no_regression({"C_a": 2.11}, stored)
    with pytest.raises(ValueError, match="no frozen value"):
        C.assert_no_regression({"C_new": 1.0}, stored)


def test_fast_calibration_within_frozen():
    # fast ensembles are strict subsets, so their sups cannot exceed the
    # frozen full-ensemble sups (modulo the platform slack)
    stored = C.load_constants()
    measured = C.run_calibration(fast=True)
    assert measured["fast"] is True
    C.assert_no_regression(measured["values"], stored["values"],
                           stored["slack"])
