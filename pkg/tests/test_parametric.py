import itertools
import os
import tempfile

import numpy as np
import tables
import torch
from torchtestcase import TorchTestCase

from paramrom.archive import load_model, save_model
from paramrom.exceptions import (
    ArchiveCorruptedError,
    ArchiveError,
    ArchiveVersionError,
    CollinearParametersError,
    DuplicateParameterError,
    ExtrapolationError,
)
from paramrom.functional import FeatureDims
from paramrom.operators import ReducedOperatorSet
from paramrom.parametric import Triangulation, build_interpolant, interpolate_operators
from paramrom.pod import PodBasis
from paramrom.scaling import ScalingTransform

from tests.helpers import LAYOUT, random_basis

torch.set_default_dtype(torch.float64)

DIMS = FeatureDims(3, 2)
GRID = torch.tensor(list(itertools.product([0.0, 0.5, 1.0], repeat=2)))


def random_sets(d, seed=0):
    g = torch.Generator().manual_seed(seed)
    return [
        ReducedOperatorSet.from_matrix(torch.randn(DIMS.r, DIMS.total, generator=g), DIMS)
        for _ in range(d)
    ]


def affine_sets(points, seed=1):
    """Operator matrices depending affinely on the parameter"""
    g = torch.Generator().manual_seed(seed)
    M0, M1, M2 = torch.randn(3, DIMS.r, DIMS.total, generator=g)
    field = lambda mu: M0 + mu[0] * M1 + mu[1] * M2
    return [ReducedOperatorSet.from_matrix(field(p), DIMS) for p in points], field


def triangle_area(points):
    a, b, c = points
    return 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))


class TestTriangulation(TorchTestCase):
    def test_grid(self):
        tri = Triangulation(GRID)
        self.assertEqual(len(tri.simplices), 8)
        self.assertEqual(set(tri.simplices.reshape(-1).tolist()), set(range(9)))
        area = sum(triangle_area(tri.points[s]) for s in tri.simplices)
        self.assertAlmostEqual(area, 1.0, places=12)

    def test_single_triangle(self):
        tri = Triangulation([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        self.assertEqual(tri.simplices.tolist(), [[0, 1, 2]])
        self.assertEqual(tri.neighbors.tolist(), [[-1, -1, -1]])

    def test_cocircular_diagonal(self):
        for order in (
            [(0, 0), (1, 0), (0, 1), (1, 1)],
            [(1, 0), (0, 0), (1, 1), (0, 1)],
        ):
            tri = Triangulation(torch.tensor(order, dtype=torch.float64))
            self.assertEqual(len(tri.simplices), 2)
            for simplex in tri.simplices.tolist():
                self.assertIn(0, simplex)
                self.assertIn(3, simplex)

    def test_degenerate(self):
        with self.assertRaises(DuplicateParameterError):
            Triangulation([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
        with self.assertRaises(CollinearParametersError):
            Triangulation([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        with self.assertRaises(CollinearParametersError):
            Triangulation([[0.0, 0.0], [1.0, 1.0]])

    def test_one_dimensional(self):
        tri = Triangulation(torch.tensor([2.0, 0.0, 1.0]))
        self.assertEqual(tri.simplices.tolist(), [[0, 2], [1, 2]])
        s, w = tri.locate(torch.tensor([1.5]))
        self.assertEqual(s, 0)
        self.assertTrue(np.allclose(w, [0.5, 0.5]))
        with self.assertRaises(ExtrapolationError):
            tri.locate(torch.tensor([2.5]))

    def test_shared_edge_lowest_index(self):
        tri = Triangulation(GRID)
        point = np.array([0.25, 0.25])
        s, w = tri.locate(point)
        containing = [
            t for t in range(len(tri.simplices)) if np.all(tri.barycentric(t, point) >= -1e-12)
        ]
        self.assertEqual(s, min(containing))
        self.assertAlmostEqual(w.sum(), 1.0, places=14)


class TestInterpolation(TorchTestCase):
    def setUp(self):
        self.sets = random_sets(len(GRID))
        self.rom = build_interpolant(GRID, self.sets)

    def test_vertex_exactness(self):
        for point, ops in zip(GRID, self.sets):
            self.assertEqual(
                interpolate_operators(self.rom, point).operator_matrix(), ops.operator_matrix()
            )

    def test_edge_midpoint(self):
        # (0,0) and (0.5,0) share an edge on the hull
        out = interpolate_operators(self.rom, torch.tensor([0.25, 0.0]))
        expected = 0.5 * (self.sets[0].operator_matrix() + self.sets[3].operator_matrix())
        self.assertLess((out.operator_matrix() - expected).abs().max().item(), 1e-12)

    def test_affine_reproduction(self):
        sets, field = affine_sets(GRID)
        rom = build_interpolant(GRID, sets)
        g = torch.Generator().manual_seed(5)
        for mu in torch.rand(50, 2, generator=g):
            error = interpolate_operators(rom, mu).operator_matrix() - field(mu)
            self.assertLess(error.abs().max().item(), 1e-12)

    def test_barycentric_oracle(self):
        g = torch.Generator().manual_seed(6)
        tri = self.rom.triangulation
        for mu in torch.rand(20, 2, generator=g):
            s, _ = tri.locate(mu)
            vertices = tri.simplices[s]
            P = torch.from_numpy(tri.points[vertices])
            # weights solving [P^T; 1] w = [mu; 1]
            system = torch.cat([P.mT, torch.ones(1, 3)])
            w = torch.linalg.lstsq(system, torch.cat([mu, torch.ones(1)])[:, None]).solution[:, 0]
            expected = sum(w[i] * self.sets[v].operator_matrix() for i, v in enumerate(vertices))
            error = interpolate_operators(self.rom, mu).operator_matrix() - expected
            self.assertLess(error.abs().max().item(), 1e-10)

    def test_within_vertex_range(self):
        g = torch.Generator().manual_seed(8)
        tri = self.rom.triangulation
        for mu in torch.rand(30, 2, generator=g):
            s, _ = tri.locate(mu)
            corners = torch.stack([self.sets[v].operator_matrix() for v in tri.simplices[s]])
            out = interpolate_operators(self.rom, mu).operator_matrix()
            self.assertTrue((out >= corners.min(dim=0).values - 1e-12).all())
            self.assertTrue((out <= corners.max(dim=0).values + 1e-12).all())

    def test_continuity(self):
        mu = torch.tensor([0.5, 0.25])
        eps = torch.tensor([1e-9, 0.0])
        left = interpolate_operators(self.rom, mu - eps).operator_matrix()
        right = interpolate_operators(self.rom, mu + eps).operator_matrix()
        self.assertLess((left - right).abs().max().item(), 1e-6)

    def test_outside_hull(self):
        with self.assertRaises(ExtrapolationError):
            interpolate_operators(self.rom, torch.tensor([1.1, 0.5]))


class TestArchive(TorchTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "model.h5")
        rom = build_interpolant(GRID, random_sets(len(GRID)))
        self.rom = rom.with_model(
            basis=PodBasis(random_basis(LAYOUT.N, 3), torch.tensor([3.0, 2.0, 1.0, 0.5])),
            scaling=ScalingTransform(LAYOUT, torch.tensor([0.0, 300.0]), torch.tensor([2.0, 5.0])),
            layout=LAYOUT,
            reference_state=torch.linspace(0.0, 1.0, LAYOUT.N),
            metadata={"regularization": [1e-3, 1e2, 1e-3], "K": 60},
        )
        save_model(self.rom, self.path)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        loaded = load_model(self.path)
        self.assertEqual(loaded.train_params, self.rom.train_params)
        self.assertEqual(loaded.basis.basis, self.rom.basis.basis)
        self.assertEqual(loaded.scaling.scales, self.rom.scaling.scales)
        self.assertEqual(loaded.reference_state, self.rom.reference_state)
        self.assertEqual(loaded.metadata, self.rom.metadata)
        g = torch.Generator().manual_seed(2)
        for mu in torch.rand(10, 2, generator=g):
            a = interpolate_operators(self.rom, mu).operator_matrix()
            b = interpolate_operators(loaded, mu).operator_matrix()
            self.assertTrue(torch.equal(a, b))

    def test_ordering_mismatch(self):
        with tables.open_file(self.path, mode="a") as h5:
            h5.root._v_attrs.ordering = "kron-full"
        with self.assertRaises(ArchiveVersionError):
            load_model(self.path)

    def test_checksum_mismatch(self):
        with tables.open_file(self.path, mode="a") as h5:
            h5.root.operators[0, 0, 0] = 123.0
        with self.assertRaises(ArchiveCorruptedError):
            load_model(self.path)

    def test_empty_and_missing(self):
        empty = os.path.join(self.tmp.name, "empty.h5")
        open(empty, "w").close()
        with self.assertRaises(ArchiveCorruptedError):
            load_model(empty)
        with self.assertRaises(ArchiveError):
            load_model(os.path.join(self.tmp.name, "absent.h5"))

    def test_incomplete_model(self):
        with self.assertRaises(ArchiveError):
            save_model(build_interpolant(GRID, random_sets(len(GRID))), self.path)
