import numpy as np
import pytest

from steerflow import lattice
from steerflow.compositor import (
    MissingTile,
    RenderStyle,
    compose,
    composition_cost,
    join_schedule,
    monolithic_render,
    render_frame,
    render_leaves,
)
from steerflow.lattice import MacroFields
from steerflow.partition import PartitionTree, Rect, TreeNode, build_tree
from steerflow.scheduler import RoleConfig
from steerflow.viz import SubImage

from util import random_scene


def random_macro(rng, nx, ny):
    return MacroFields(
        rho=1.0 + 0.01 * rng.standard_normal((ny, nx)),
        ux=0.05 * rng.standard_normal((ny, nx)),
        uy=0.05 * rng.standard_normal((ny, nx)),
        temp=25.0 + rng.standard_normal((ny, nx)),
    )


def fluid_flags(nx, ny):
    return np.zeros((ny, nx), dtype=np.int8)


def fig4_tree():
    """The five-leaf example tree: root(AB(A,B), CDE(DE(D,E), C))."""
    leaves = {
        "A": Rect(0, 8, 8, 8),
        "B": Rect(8, 8, 8, 8),
        "D": Rect(0, 0, 4, 8),
        "E": Rect(4, 0, 4, 8),
        "C": Rect(8, 0, 8, 8),
    }
    nodes = []

    def mk(rect, name=None):
        n = TreeNode(id=len(nodes), rect=rect, fluid_cells=rect.cells(),
                     work_estimate=float(rect.cells()))
        n.name = name
        nodes.append(n)
        return n

    root = mk(Rect(0, 0, 16, 16), "root")
    ab = mk(Rect(0, 8, 16, 8), "AB")
    a = mk(leaves["A"], "A")
    b = mk(leaves["B"], "B")
    cde = mk(Rect(0, 0, 16, 8), "CDE")
    de = mk(Rect(0, 0, 8, 8), "DE")
    d = mk(leaves["D"], "D")
    e = mk(leaves["E"], "E")
    c = mk(leaves["C"], "C")
    ab.left, ab.right = a, b
    de.left, de.right = d, e
    cde.left, cde.right = de, c
    root.left, root.right = ab, cde
    return PartitionTree(root=root, nodes=nodes, shape=(16, 16))


class TestCompose:
    def test_single_leaf_is_identity(self):
        rng = np.random.default_rng(0)
        flags = fluid_flags(8, 8)
        tree = build_tree(flags, max_leaf_cells=64)
        macro = random_macro(rng, 8, 8)
        style = RenderStyle(px_per_cell=2)
        tiles = render_leaves(tree, macro, style, flags)
        assert len(tiles) == 1
        frame = compose(tree, tiles, seq=3, level=1, field_id=style.field_id)
        np.testing.assert_array_equal(frame.buffer, tiles[0].pixels)
        assert (frame.seq, frame.level) == (3, 1)

    def test_four_leaves_tile_frame_exactly(self):
        flags = fluid_flags(16, 16)
        tree = build_tree(flags, max_leaf_cells=64)
        assert len(tree.leaves()) == 4
        coverage = np.zeros((16, 16), dtype=int)
        for leaf in tree.leaves():
            coverage[leaf.rect.slices()] += 1
        np.testing.assert_array_equal(coverage, 1)

    @pytest.mark.parametrize("seed", range(5))
    def test_bit_identical_to_monolithic(self, seed):
        rng = np.random.default_rng(seed)
        nx = int(rng.integers(17, 33))
        ny = int(rng.integers(17, 33))
        scene = random_scene(rng)
        flags = lattice.rasterize(scene, nx, ny).flags
        tree = build_tree(flags, max_leaf_cells=96)
        assert tree.height() <= 4
        macro = random_macro(rng, nx, ny)
        style = RenderStyle(field_id=int(rng.integers(0, 4)), px_per_cell=2)
        frame = render_frame(tree, macro, style, flags)
        np.testing.assert_array_equal(frame.buffer, monolithic_render(macro, style, flags))

    def test_schedule_independence(self):
        rng = np.random.default_rng(42)
        flags = fluid_flags(32, 32)
        tree = build_tree(flags, max_leaf_cells=64)
        macro = random_macro(rng, 32, 32)
        style = RenderStyle()
        serial = render_frame(tree, macro, style, flags)
        threaded = render_frame(tree, macro, style, flags, roles=RoleConfig(2, 4))
        np.testing.assert_array_equal(serial.buffer, threaded.buffer)

    def test_missing_tile_detected(self):
        flags = fluid_flags(16, 16)
        tree = build_tree(flags, max_leaf_cells=64)
        rng = np.random.default_rng(1)
        macro = random_macro(rng, 16, 16)
        tiles = render_leaves(tree, macro, RenderStyle(), flags)
        with pytest.raises(MissingTile):
            compose(tree, tiles[:-1])

    def test_per_leaf_pixels_equal_crop_of_whole(self):
        rng = np.random.default_rng(3)
        flags = fluid_flags(24, 16)
        tree = build_tree(flags, max_leaf_cells=64)
        macro = random_macro(rng, 24, 16)
        style = RenderStyle(px_per_cell=3)
        whole = monolithic_render(macro, style, flags)
        for tile in render_leaves(tree, macro, style, flags):
            crop = whole[tile.y0 : tile.y0 + tile.h, tile.x0 : tile.x0 + tile.w]
            np.testing.assert_array_equal(tile.pixels, crop)


class TestFig4:
    def test_join_waves_match_paper_order(self):
        tree = fig4_tree()
        names = {n.id: n.name for n in tree.nodes}
        waves = [[names[i] for i in wave] for wave in join_schedule(tree)]
        assert waves == [["DE"], ["AB", "CDE"], ["root"]]

    def test_total_joins_is_four(self):
        tree = fig4_tree()
        critical, total = composition_cost(tree)
        assert total == 4
        assert critical == 3

    def test_composes_correct_placement(self):
        tree = fig4_tree()
        tiles = []
        fill = {}
        for leaf in tree.leaves():
            v = 10 + leaf.id
            r = leaf.rect
            img = np.full((r.h, r.w, 4), v, dtype=np.uint8)
            tiles.append(SubImage(pixels=img, x0=r.x0, y0=16 - r.y0 - r.h,
                                  node_id=leaf.id))
            fill[leaf.id] = v
        frame = compose(tree, tiles)
        assert frame.width == 16 and frame.height == 16
        for leaf in tree.leaves():
            r = leaf.rect
            sy = 16 - r.y0 - r.h
            block = frame.buffer[sy : sy + r.h, r.x0 : r.x0 + r.w]
            assert (block == fill[leaf.id]).all()


class TestCost:
    def test_single_leaf(self):
        tree = build_tree(fluid_flags(8, 8), max_leaf_cells=64)
        assert composition_cost(tree) == (0, 0)

    def test_balanced_eight_leaves(self):
        tree = build_tree(fluid_flags(64, 8), max_leaf_cells=64)
        assert len(tree.leaves()) == 8
        assert composition_cost(tree) == (3, 7)

    def test_cost_law_on_random_trees(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            nx = int(rng.integers(17, 64))
            ny = int(rng.integers(17, 64))
            tree = build_tree(fluid_flags(nx, ny), max_leaf_cells=48)
            critical, total = composition_cost(tree)
            assert total == len(tree.leaves()) - 1
            assert critical == tree.height()
