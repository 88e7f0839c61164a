import math
import time

import pytest
import torch
from torchtestcase import TorchTestCase

from paramrom.exceptions import ConfigError, StabilityError
from paramrom.parametric import build_interpolant, interpolate_operators
from paramrom.pod import PodBasis
from paramrom.rom import integrate
from paramrom.snapshots import uniform_grid
from paramrom.synthfom import SynthConfig, generate, generate_grid, substeps

from tests.helpers import random_basis, stable_operators

torch.set_default_dtype(torch.float64)

SMALL = SynthConfig(n_x=64, K=21)


class TestSynthConfig(TorchTestCase):
    def test_validation(self):
        with self.assertRaises(ConfigError):
            SynthConfig(n_x=8)
        with self.assertRaises(ConfigError):
            SynthConfig(n_v=3)
        with self.assertRaises(ConfigError):
            SynthConfig(viscosity=0.0)
        with self.assertRaises(ConfigError):
            SynthConfig(K=1)

    def test_signal(self):
        config = SynthConfig(mu_q=1.5, mu_p=0.5, K=11, delta=0.1)
        signal = config.signal()
        self.assertEqual(signal.t_end, config.T)
        self.assertEqual(signal(0.0), torch.tensor([0.2, 0.1]))
        self.assertLess((signal(1.0) - torch.tensor([0.75, 0.15])).abs().max().item(), 1e-15)

    def test_substeps(self):
        self.assertGreaterEqual(substeps(SMALL), SMALL.min_substeps)
        with self.assertRaises(StabilityError):
            substeps(SynthConfig(n_x=5000, max_substeps=10))


class TestGenerate(TorchTestCase):
    def test_shapes(self):
        sset = generate(SMALL)
        self.assertEqual(tuple(sset.states.shape), (128, 21))
        self.assertEqual(tuple(sset.inputs.shape), (2, 21))
        self.assertEqual(sset.layout.names, ["velocity", "temperature"])
        self.assertEqual(sset.parameter, torch.tensor([1.0, 1.0]))
        self.assertEqual(sset.metadata["input_signal"]["kind"], "ramp")
        self.assertGreaterEqual(sset.metadata["fom_seconds"], 0.0)
        self.assertTrue(torch.isfinite(sset.states).all())

    def test_zero_trajectory(self):
        config = SynthConfig(
            n_x=32, K=11, temperature_ref=0.0, inflow_ramp=(0.0, 0.0), outflow_ramp=(0.0, 0.0)
        )
        sset = generate(config)
        self.assertEqual(sset.states, torch.zeros(64, 11))

    def test_diffusion_decay(self):
        config = SynthConfig(
            n_x=256,
            n_v=1,
            advection=False,
            initial_amplitude=1.0,
            inflow_ramp=(0.0, 0.0),
            outflow_ramp=(0.0, 0.0),
        )
        sset = generate(config)
        x = config.dx * torch.arange(1, config.n_x + 1)
        decay = torch.exp(-config.viscosity * math.pi**2 * sset.times)
        exact = torch.sin(math.pi * x)[:, None] * decay[None, :]
        rel = torch.linalg.norm(sset.states - exact) / torch.linalg.norm(exact)
        self.assertLess(rel.item(), 0.01)

    def test_deterministic(self):
        self.assertEqual(generate(SMALL).states, generate(SMALL).states)

    def test_forcing_scales_with_parameter(self):
        low = generate(SynthConfig(n_x=64, K=21, mu_q=0.5))
        high = generate(SynthConfig(n_x=64, K=21, mu_q=1.5))
        velocity = slice(0, 64)
        self.assertGreater(
            high.states[velocity, -1].abs().max(), low.states[velocity, -1].abs().max()
        )

    def test_spatial_convergence(self):
        runs = [generate(SynthConfig(n_x=n, K=41)) for n in (127, 255, 511)]
        # values at the coarse grid points
        coarse = runs[0].states[:127]
        mid = runs[1].states[:255][1::2]
        fine = runs[2].states[:511][3::4]
        order = math.log2(
            torch.linalg.norm(coarse - mid).item() / torch.linalg.norm(mid - fine).item()
        )
        self.assertGreaterEqual(order, 1.8)


class TestGenerateGrid(TorchTestCase):
    def test_order(self):
        sets = generate_grid(SMALL, [0.8, 1.2], [0.9, 1.0, 1.1])
        self.assertEqual(len(sets), 6)
        self.assertEqual(sets[1].parameter, torch.tensor([0.8, 1.0]))
        self.assertEqual(sets[3].parameter, torch.tensor([1.2, 0.9]))

    def test_single_run(self):
        (sset,) = generate_grid(SMALL, [1.0], [1.0])
        self.assertEqual(sset.states, generate(SMALL).states)

    def test_workers(self):
        serial = generate_grid(SMALL, [0.8, 1.2], [1.0, 1.1])
        threaded = generate_grid(SMALL, [0.8, 1.2], [1.0, 1.1], workers=3)
        for a, b in zip(serial, threaded):
            self.assertEqual(a.states, b.states)

    def test_empty(self):
        with self.assertRaises(ConfigError):
            generate_grid(SMALL, [], [1.0])


@pytest.mark.slow
class TestOnlineSpeedup(TorchTestCase):
    def test_speedup(self):
        config = SynthConfig(n_x=100000, K=21)
        sset = generate(config)
        grid = torch.tensor([[0.5, 0.5], [1.5, 0.5], [0.5, 1.5], [1.5, 1.5]])
        rom = build_interpolant(grid, [stable_operators(float(mu[0])) for mu in grid])
        s0 = torch.tensor([0.5, -0.3, 0.2])
        best = math.inf
        for _ in range(5):
            start = time.perf_counter()
            ops = interpolate_operators(rom, sset.parameter)
            integrate(ops, s0, config.signal(), sset.times)
            best = min(best, time.perf_counter() - start)
        self.assertGreaterEqual(sset.metadata["fom_seconds"] / best, 100.0)

    def test_online_cost_independent_of_n(self):
        grid = torch.tensor([[0.5, 0.5], [1.5, 0.5], [0.5, 1.5], [1.5, 1.5]])
        ops = [stable_operators(float(mu[0])) for mu in grid]
        times = uniform_grid(0.0, 0.005, 200)
        signal = SynthConfig(K=200).signal()
        s0 = torch.tensor([0.5, -0.3, 0.2])
        seconds = []
        for n_x in (2000, 20000):
            layout = SynthConfig(n_x=n_x).layout
            rom = build_interpolant(grid, ops).with_model(
                basis=PodBasis(random_basis(layout.N, 3), torch.tensor([3.0, 2.0, 1.0])),
                layout=layout,
            )
            best = math.inf
            for _ in range(10):
                start = time.perf_counter()
                integrate(interpolate_operators(rom, torch.tensor([0.9, 1.1])), s0, signal, times)
                best = min(best, time.perf_counter() - start)
            seconds.append(best)
        self.assertLess(abs(seconds[1] - seconds[0]) / seconds[0], 0.1)
