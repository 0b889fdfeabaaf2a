import pytest

from forgedit import fixtures
from forgedit.editor import EditRequest, edit
from forgedit.errors import NotFoundError
from forgedit.finetune import FinetuneConfig, joint_finetune
from forgedit.imaging import image_to_latent, png_bytes
from forgedit.schedule import NoiseSchedule
from forgedit.store import ArtifactStore
from forgedit.unet import DEFAULT_LAYOUT, init_params

SCHED = NoiseSchedule.cosine()


@pytest.fixture(scope="module")
def result():
    item = fixtures.edit_fixture()
    cfg = FinetuneConfig(min_steps=1, max_steps=3, loss_threshold=0.0, batch_repeat=2, seed=8)
    return joint_finetune(image_to_latent(item.image), item.caption,
                          init_params(DEFAULT_LAYOUT, seed=4), cfg,
                          sched=SCHED, encoder=fixtures.default_encoder())


def test_run_roundtrip_exact(tmp_path, result):
    store = ArtifactStore(tmp_path)
    run_id = store.save_run(result, png_bytes(fixtures.edit_fixture().image))
    loaded = store.load_run(run_id)
    assert loaded.learned_params.bit_equal(result.learned_params)
    assert loaded.original_params.bit_equal(result.original_params)
    assert loaded.learned_embedding.data.tobytes() == result.learned_embedding.data.tobytes()
    assert loaded.loss_trace == result.loss_trace
    assert loaded.caption == result.caption
    assert loaded.trained_paths == result.trained_paths
    assert loaded.kind == result.kind
    assert loaded.source_latent.tobytes() == result.source_latent.tobytes()


def test_loaded_run_drives_identical_edit(tmp_path, result):
    store = ArtifactStore(tmp_path)
    run_id = store.save_run(result, png_bytes(fixtures.edit_fixture().image))
    loaded = store.load_run(run_id)
    req = EditRequest(target_prompt="a red square right on gray", combination="subtraction",
                      gamma=1.0, seed=2, ddim_steps=4)
    a = edit(result, req, encoder=fixtures.default_encoder(), sched=SCHED)
    b = edit(loaded, req, encoder=fixtures.default_encoder(), sched=SCHED)
    assert a.latent.tobytes() == b.latent.tobytes()
    assert (a.fidelity, a.alignment) == (b.fidelity, b.alignment)


def test_missing_lookups_raise(tmp_path):
    store = ArtifactStore(tmp_path)
    with pytest.raises(NotFoundError):
        store.load_run("nope")
    with pytest.raises(NotFoundError):
        store.load_sweep_manifest("nope")
    with pytest.raises(NotFoundError):
        store.load_session("nope")
    with pytest.raises(NotFoundError):
        store.load_job("nope")
    with pytest.raises(NotFoundError):
        store.image_path("nope")


def test_image_registry_write_once(tmp_path):
    store = ArtifactStore(tmp_path)
    store.register_image("x", b"first")
    store.register_image("x", b"second")
    assert store.image_path("x").read_bytes() == b"first"
