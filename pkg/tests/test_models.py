import pytest

from normalizer.errors import ManifestError
from normalizer.models import FastSlowModel, SignalModel, ThreeBodyModel, TorusModel, available_models, load_model


def test_bundled_models():
    assert {"benchmark", "integrable", "sjs", "synthetic_sjs", "two_tone"} <= set(available_models())
    assert isinstance(load_model("benchmark"), TorusModel)
    assert isinstance(load_model("synthetic_sjs"), FastSlowModel)
    assert isinstance(load_model("two_tone"), SignalModel)


def test_sjs_initial_data():
    model = load_model("sjs")
    assert isinstance(model, ThreeBodyModel)
    elements = model.elements()
    assert [el.name for el in elements] == ["jupiter", "saturn"]
    assert elements[0].mass == pytest.approx(model.star_mass / 1047.355)
    assert model.state().n_bodies == 3


def test_synthetic_model_file_builds_the_hamiltonian():
    H = load_model("synthetic_sjs").hamiltonian()
    assert H.n_dof == 4
    assert H.uncertainties["xi1"] == 1.1e-5


def test_signal_model_samples():
    model = load_model("two_tone")
    assert model.signal().shape == (8192,)
    assert model.times()[1] == 1.0


def test_unknown_model():
    with pytest.raises(ManifestError):
        load_model("jupiter_only")


def test_model_file_is_validated(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text('kind = "signal"\nname = "broken"\nt_step = 1.0\nn_samples = 10\n\n[[tones]]\nfreq = 0.1\n')
    with pytest.raises(ManifestError):
        load_model(str(path))
    path.write_text('kind = "torus"\nname = "missing"\nhamiltonian = "nowhere.psx"\nomega = [1.0, 0.5]\n')
    with pytest.raises(FileNotFoundError):
        load_model(str(path)).series()
