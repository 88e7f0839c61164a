import torch
from torchtestcase import TorchTestCase

from paramrom.exceptions import DimensionMismatchError, UnknownVariableError
from paramrom.scaling import (
    ScalingTransform,
    apply_scaling,
    default_mean_subtract,
    fit_scaling,
    invert_scaling,
)
from paramrom.snapshots import GlobalDataMatrix, Variable, VariableLayout

torch.set_default_dtype(torch.float64)

LAYOUT = VariableLayout(
    (Variable("velocity"), Variable("pressure"), Variable("temperature")), 50
)


def training_matrix(seed=0):
    g = torch.Generator().manual_seed(seed)
    X = torch.randn(LAYOUT.N, 30, generator=g)
    X[LAYOUT.block("velocity")] *= 3.0
    X[LAYOUT.block("pressure")] = 1e5 + 50.0 * X[LAYOUT.block("pressure")]
    X[LAYOUT.block("temperature")] = 300.0 + 5.0 * X[LAYOUT.block("temperature")]
    spans = ((0, 30),)
    column_map = torch.stack([torch.zeros(30, dtype=torch.int64), torch.arange(30)], 1)
    return GlobalDataMatrix(X, column_map, spans, LAYOUT)


class TestScaling(TorchTestCase):
    def setUp(self):
        self.data = training_matrix()
        self.transform = fit_scaling(self.data, default_mean_subtract(LAYOUT))

    def test_default_flags(self):
        self.assertEqual(default_mean_subtract(LAYOUT), ("pressure", "temperature"))

    def test_inverse(self):
        X = self.data.matrix
        x = apply_scaling(self.transform, X)
        X_inv = invert_scaling(self.transform, x)
        delta = torch.linalg.norm(X - X_inv) / torch.linalg.norm(X)
        self.assertLess(delta.item(), 1e-12)

    def test_unit_range(self):
        x = self.transform(self.data.matrix)
        for name, rows in LAYOUT.blocks():
            self.assertAlmostEqual(x[rows].abs().max().item(), 1.0, places=12)
        self.assertAlmostEqual(x[LAYOUT.block("pressure")].mean().item(), 0.0, places=12)
        # velocity is only scaled
        self.assertEqual(self.transform.shifts[0].item(), 0.0)

    def test_shift_field(self):
        zero = self.transform(self.transform.shift_field)
        self.assertEqual(zero, torch.zeros(LAYOUT.N))

    def test_vector_states(self):
        s = self.data.matrix[:, 3]
        self.assertEqual(self.transform(s), self.transform(self.data.matrix)[:, 3])

    def test_constant_block(self):
        data = training_matrix()
        data.matrix[LAYOUT.block("velocity")] = 0.0
        transform = fit_scaling(data, ())
        self.assertEqual(transform.scales[0].item(), 1.0)

    def test_validation(self):
        with self.assertRaises(DimensionMismatchError):
            ScalingTransform(LAYOUT, torch.zeros(2), torch.ones(2))
        with self.assertRaises(DimensionMismatchError):
            ScalingTransform(LAYOUT, torch.zeros(3), torch.tensor([1.0, 0.0, 1.0]))
        with self.assertRaises(UnknownVariableError):
            fit_scaling(self.data, ("density",))
        with self.assertRaises(DimensionMismatchError):
            self.transform(torch.zeros(7, 2))
