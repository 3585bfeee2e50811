import numpy as np
import pytest

from ivcl.exceptions import ConfigurationError
from ivcl.toyworlds.attributes import BACKGROUND_COLOR, PLATFORM_LIT_COLOR, Shape, SizeTier
from ivcl.toyworlds.render import PlatformState, Scene, SceneObject, render_frame, render_frame_u8

RED = (255, 0, 0)


def test_empty_scene_is_background():
    image = render_frame_u8(Scene(rows=2, cols=2), 8, 8)
    assert image.shape == (8, 8, 3)
    assert (image == np.asarray(BACKGROUND_COLOR, dtype=np.uint8)).all()


def test_objects_stay_in_their_cell():
    scene = Scene(rows=2, cols=2, objects=(SceneObject(0, 1, Shape.CUBE, SizeTier.LARGE, RED),))
    image = render_frame_u8(scene, 16, 16)
    red = (image == np.asarray(RED, dtype=np.uint8)).all(axis=-1)
    assert red[4, 12]
    assert not red[:, :8].any()
    assert not red[8:].any()


def test_platform_band():
    image = render_frame_u8(Scene(rows=4, cols=4, platform=PlatformState.LIT), 16, 16)
    assert (image[13, 8] == np.asarray(PLATFORM_LIT_COLOR, dtype=np.uint8)).all()
    assert (image[4, 8] == np.asarray(BACKGROUND_COLOR, dtype=np.uint8)).all()


@pytest.mark.parametrize(
    "scene",
    [
        pytest.param(
            Scene(rows=2, cols=2, objects=(SceneObject(2, 0, Shape.CUBE, SizeTier.SMALL, RED),)), id="outside"
        ),
        pytest.param(
            Scene(
                rows=2,
                cols=2,
                objects=(SceneObject(1, 0, Shape.CUBE, SizeTier.SMALL, RED),),
                platform=PlatformState.DIM,
            ),
            id="on_platform",
        ),
    ],
)
def test_invalid_scenes(scene: Scene):
    with pytest.raises(ConfigurationError):
        render_frame_u8(scene, 8, 8)


def test_image_smaller_than_grid():
    with pytest.raises(ConfigurationError):
        render_frame_u8(Scene(rows=4, cols=4), 2, 2)


def test_float_frames():
    frame = render_frame(Scene(rows=2, cols=2), 4, 4)
    assert frame.dtype == np.float32
    assert 0.0 <= frame.min() and frame.max() <= 1.0
