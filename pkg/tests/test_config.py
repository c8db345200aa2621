import json

import numpy as np
import pytest

from cbrdesign import ConfigError
from cbrdesign.config import (
    design_from_file,
    load_config,
    problem_from_config,
    validate_config,
)
from cbrdesign.model import DesignSpace


def cbrc_doc(**overrides):
    doc = {
        "design_space": [{"coordinate": [0.0]}, {"coordinate": [1.0]}],
        "regression": {"type": "explicit", "vectors": [[1.0, 0.0], [1.0, 1.0]]},
        "criterion": {
            "type": "cbrc",
            "terms": [{"B": [[0.0, 0.0], [0.0, 0.0]], "H": [[1.0, 0.0], [0.0, 1.0]]}],
        },
        "constraints": {"total_trials": {"relation": "=", "value": 3}},
    }
    doc.update(overrides)
    return doc


class TestSchema:
    def test_valid_documents_pass(self):
        validate_config(cbrc_doc())
        validate_config({"criterion": {"type": "paper_example", "rho": 0.25}})

    def test_missing_criterion(self):
        with pytest.raises(ConfigError, match="criterion"):
            validate_config({})

    def test_unknown_top_level_key(self):
        doc = cbrc_doc()
        doc["extra"] = 1
        with pytest.raises(ConfigError):
            validate_config(doc)

    def test_bad_criterion_type(self):
        with pytest.raises(ConfigError) as err:
            validate_config({"criterion": {"type": "mystery"}})
        assert "$.criterion" in str(err.value)

    def test_bad_rho_range(self):
        for rho in (0.0, 1.0, -1.0, 2.0):
            with pytest.raises(ConfigError):
                validate_config({"criterion": {"type": "paper_example", "rho": rho}})

    def test_negative_degree(self):
        doc = cbrc_doc(regression={"type": "polynomial", "degree": -1})
        with pytest.raises(ConfigError) as err:
            validate_config(doc)
        assert "regression" in str(err.value)

    def test_row_missing_rhs(self):
        doc = cbrc_doc()
        doc["constraints"]["rows"] = [
            {"coefficients": [1.0, 0.0], "relation": "<="}
        ]
        with pytest.raises(ConfigError) as err:
            validate_config(doc)
        assert "constraints" in str(err.value)


class TestLoading:
    def test_load_valid_file(self, tmp_path):
        path = tmp_path / "p.json"
        path.write_text(json.dumps(cbrc_doc()))
        doc = load_config(str(path))
        assert doc["criterion"]["type"] == "cbrc"

    def test_malformed_json_reports_position(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"criterion": \n  {"type": }')
        with pytest.raises(ConfigError, match=r"line 2, column"):
            load_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read config"):
            load_config(str(tmp_path / "nope.json"))


class TestProblemBuilding:
    def test_cbrc_roundtrip(self):
        problem = problem_from_config(cbrc_doc())
        assert problem.space.size == 2
        assert problem.p == 2
        assert len(problem.terms) == 1
        assert problem.constraints.total_trials == ("=", 3.0)

    def test_polynomial_and_labels(self):
        doc = cbrc_doc(
            design_space=[
                {"label": "lo", "coordinate": [0.0]},
                {"label": "hi", "coordinate": [1.0]},
            ],
            regression={"type": "polynomial", "degree": 1},
        )
        problem = problem_from_config(doc)
        assert problem.space.labels == ("lo", "hi")
        np.testing.assert_array_equal(
            problem.regression.matrix, [[1.0, 0.0], [1.0, 1.0]]
        )

    def test_partial_labels_rejected(self):
        doc = cbrc_doc(
            design_space=[
                {"label": "lo", "coordinate": [0.0]},
                {"coordinate": [1.0]},
            ]
        )
        with pytest.raises(ConfigError, match="label every point or none"):
            problem_from_config(doc)

    def test_inconsistent_coordinates(self):
        doc = cbrc_doc(
            design_space=[{"coordinate": [0.0]}, {"coordinate": [1.0, 2.0]}]
        )
        with pytest.raises(ConfigError) as err:
            problem_from_config(doc)
        assert "$.design_space[1].coordinate" in str(err.value)

    def test_semantic_errors_become_config_errors(self):
        # H of zeros is structurally fine but not positive definite
        doc = cbrc_doc()
        doc["criterion"]["terms"][0]["H"] = [[0.0, 0.0], [0.0, 0.0]]
        with pytest.raises(ConfigError) as err:
            problem_from_config(doc)
        assert "$.criterion" in str(err.value)

    def test_null_upper_bound_is_unbounded(self):
        doc = cbrc_doc()
        doc["constraints"]["bounds"] = {"upper": [None, 2.5]}
        problem = problem_from_config(doc)
        assert problem.constraints.upper[0] == np.inf
        assert problem.constraints.upper[1] == 2.5

    def test_row_length_checked(self):
        doc = cbrc_doc()
        doc["constraints"]["rows"] = [
            {"coefficients": [1.0], "relation": "<=", "rhs": 1.0}
        ]
        with pytest.raises(ConfigError) as err:
            problem_from_config(doc)
        assert "$.constraints.rows[0].coefficients" in str(err.value)

    def test_paper_example(self):
        problem = problem_from_config(
            {"criterion": {"type": "paper_example", "rho": 0.1}}
        )
        assert problem.space.size == 51
        assert problem.constraints.total_trials == ("=", 10.0)
        assert problem.constraints.rows == ()

        spaced = problem_from_config(
            {
                "criterion": {
                    "type": "paper_example",
                    "rho": 0.1,
                    "with_constraint10": True,
                }
            }
        )
        assert len(spaced.constraints.rows) == 49

    def test_paper_example_merges_constraints(self):
        doc = {
            "criterion": {
                "type": "paper_example",
                "rho": 0.1,
                "with_constraint10": True,
            },
            "constraints": {"integrality": True},
        }
        problem = problem_from_config(doc)
        assert problem.constraints.integrality
        assert len(problem.constraints.rows) == 49
        assert problem.constraints.total_trials == ("=", 10.0)

    def test_rcr_needs_equality_total(self):
        doc = {
            "design_space": [{"coordinate": [0.0]}, {"coordinate": [1.0]}],
            "regression": {"type": "polynomial", "degree": 1},
            "criterion": {
                "type": "rcr_linear",
                "n": 5,
                "D": [[1.0, 0.0], [0.0, 1.0]],
                "A": [[1.0, 0.0], [0.0, 1.0]],
            },
        }
        with pytest.raises(ConfigError) as err:
            problem_from_config(doc)
        assert "$.constraints.total_trials" in str(err.value)

        doc["constraints"] = {"total_trials": {"relation": "<=", "value": 5}}
        with pytest.raises(ConfigError):
            problem_from_config(doc)

        doc["constraints"] = {"total_trials": {"relation": "=", "value": 5.5}}
        with pytest.raises(ConfigError) as err:
            problem_from_config(doc)
        assert "positive integer" in str(err.value)

    def test_rcr_linear_built(self):
        doc = {
            "design_space": [{"coordinate": [0.0]}, {"coordinate": [1.0]}],
            "regression": {"type": "polynomial", "degree": 1},
            "criterion": {
                "type": "rcr_linear",
                "n": 5,
                "D": [[1.0, 0.0], [0.0, 1.0]],
                "A": [[1.0, 0.0], [0.0, 1.0]],
            },
            "constraints": {"total_trials": {"relation": "=", "value": 5}},
        }
        problem = problem_from_config(doc)
        assert len(problem.terms) == 2
        np.testing.assert_allclose(problem.terms[1][1], 4.0 * np.eye(2))
        assert problem.constraints.total_trials == ("=", 5.0)

    def test_rcr_imse_default_nu(self):
        doc = {
            "design_space": [{"coordinate": [c]} for c in (0.0, 0.5, 1.0)],
            "regression": {"type": "polynomial", "degree": 1},
            "criterion": {"type": "rcr_imse", "n": 3, "D": [[1.0, 0.0], [0.0, 1.0]]},
            "constraints": {"total_trials": {"relation": "=", "value": 4}},
        }
        problem = problem_from_config(doc)
        f = problem.regression.matrix
        expect_v = f.T @ f / 3.0
        np.testing.assert_allclose(problem.terms[0][1], expect_v, atol=1e-14)

    def test_rcr_imse_nu_length_checked(self):
        doc = {
            "design_space": [{"coordinate": [c]} for c in (0.0, 0.5, 1.0)],
            "regression": {"type": "polynomial", "degree": 1},
            "criterion": {
                "type": "rcr_imse",
                "n": 3,
                "D": [[1.0, 0.0], [0.0, 1.0]],
                "nu": [0.5, 0.5],
            },
            "constraints": {"total_trials": {"relation": "=", "value": 4}},
        }
        with pytest.raises(ConfigError) as err:
            problem_from_config(doc)
        assert "$.criterion.nu" in str(err.value)

    def test_rcr_keeps_user_rows(self):
        doc = {
            "design_space": [{"coordinate": [c]} for c in (0.0, 0.5, 1.0)],
            "regression": {"type": "polynomial", "degree": 1},
            "criterion": {"type": "rcr_imse", "n": 3, "D": [[1.0, 0.0], [0.0, 1.0]]},
            "constraints": {
                "total_trials": {"relation": "=", "value": 4},
                "rows": [
                    {"coefficients": [1.0, 1.0, 0.0], "relation": "<=", "rhs": 2.0}
                ],
                "integrality": True,
            },
        }
        problem = problem_from_config(doc)
        assert len(problem.constraints.rows) == 1
        assert problem.constraints.integrality


class TestDesignFiles:
    space = DesignSpace.from_coords([0.0, 1.0])

    def write(self, tmp_path, payload):
        path = tmp_path / "design.json"
        path.write_text(json.dumps(payload))
        return str(path)

    def test_bare_list(self, tmp_path):
        design = design_from_file(self.write(tmp_path, [2.0, 8.0]), self.space)
        np.testing.assert_array_equal(design.weights, [2.0, 8.0])

    def test_label_mapping(self, tmp_path):
        design = design_from_file(self.write(tmp_path, {"1": 8.0}), self.space)
        np.testing.assert_array_equal(design.weights, [0.0, 8.0])

    def test_solution_object(self, tmp_path):
        payload = {"status": "optimal", "design": {"labels": ["0", "1"], "weights": [2, 8]}}
        design = design_from_file(self.write(tmp_path, payload), self.space)
        np.testing.assert_array_equal(design.weights, [2.0, 8.0])

    def test_weights_object(self, tmp_path):
        design = design_from_file(self.write(tmp_path, {"weights": [1.0, 2.0]}), self.space)
        np.testing.assert_array_equal(design.weights, [1.0, 2.0])

    def test_label_mismatch(self, tmp_path):
        payload = {"labels": ["a", "b"], "weights": [1, 2]}
        with pytest.raises(ConfigError, match="labels do not match"):
            design_from_file(self.write(tmp_path, payload), self.space)

    def test_unknown_label(self, tmp_path):
        with pytest.raises(ConfigError):
            design_from_file(self.write(tmp_path, {"7": 1.0}), self.space)

    def test_wrong_length(self, tmp_path):
        with pytest.raises(ConfigError, match="expected 2 weights"):
            design_from_file(self.write(tmp_path, [1.0, 2.0, 3.0]), self.space)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1, 2")
        with pytest.raises(ConfigError, match="invalid JSON"):
            design_from_file(str(path), self.space)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read design"):
            design_from_file(str(tmp_path / "gone.json"), self.space)
