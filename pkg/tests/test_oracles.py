"""The numerical oracles themselves: sanity on instances with known answers."""

import numpy as np
import pytest

from treespace import Tree, compute_geodesic, frechet_value
from treespace.frechet import FrechetProblem
from treespace.oracles import fd_directional, fd_gradient, geodesic_grid_min
from conftest import RAY_A, random_tree, ray_tree, star_tree


class TestFdGradient:
    def test_zero_at_single_datum(self):
        rng = np.random.default_rng(0)
        t = random_tree(rng, 5)
        g = fd_gradient(FrechetProblem([t]), t)
        assert g.inf_norm() < 1e-8

    def test_symmetric_dataset_symmetric_partials(self, three_ray_symmetric):
        # all pendants see the same pull at the star point
        g = fd_gradient(three_ray_symmetric, star_tree())
        vals = [g.pendant(i) for i in range(5)]
        assert max(vals) - min(vals) < 1e-8

    def test_same_topology_closed_form(self):
        rng = np.random.default_rng(1)
        base = random_tree(rng, 5)
        data = [
            Tree(
                {s: float(rng.uniform(0.5, 2.0)) for s in base.interior},
                rng.uniform(0.5, 1.5, 6),
            )
            for _ in range(3)
        ]
        prob = FrechetProblem(data)
        g = fd_gradient(prob, base)
        for s, v in base.interior.items():
            expect = 2 * sum(v - t.interior[s] for t in data)
            assert g.get(s) == pytest.approx(expect, rel=1e-7)


class TestFdDirectional:
    def test_three_ray_value(self, three_ray_symmetric):
        got = fd_directional(three_ray_symmetric, star_tree(), ray_tree(RAY_A, 1.0))
        assert got == pytest.approx(2.0, abs=1e-6)

    def test_requires_nested(self, three_ray_symmetric):
        from treespace import Split

        with pytest.raises(ValueError):
            fd_directional(
                three_ray_symmetric,
                ray_tree(RAY_A, 1.0),
                ray_tree(Split({0, 2}, 5), 1.0),
            )


class TestGeodesicGridMin:
    def test_single_datum_minimum_at_endpoint(self):
        rng = np.random.default_rng(2)
        t = random_tree(rng, 5)
        x = random_tree(rng, 5)
        prob = FrechetProblem([t])
        g = compute_geodesic(x, t)
        lam, fval = geodesic_grid_min(prob, g)
        assert lam == pytest.approx(1.0, abs=1e-6)
        assert fval < 1e-10

    def test_symmetric_rays_minimum_at_star(self, three_ray_symmetric):
        # geodesic from ray a through the star onto ray b: the minimum of F
        # along it sits exactly at the star crossing (lambda = 1/2)
        from conftest import RAY_B

        g = compute_geodesic(ray_tree(RAY_A, 1.0), ray_tree(RAY_B, 1.0))
        lam, fval = geodesic_grid_min(three_ray_symmetric, g)
        assert lam == pytest.approx(0.5, abs=1e-6)
        assert fval == pytest.approx(3.0, abs=1e-9)

    def test_below_grid_values(self):
        rng = np.random.default_rng(3)
        prob = FrechetProblem([random_tree(rng, 5) for _ in range(3)])
        g = compute_geodesic(random_tree(rng, 5), random_tree(rng, 5))
        lam, fval = geodesic_grid_min(prob, g, points=65)
        from treespace import point_at

        for i in range(65):
            assert fval <= frechet_value(prob, point_at(g, i / 64)) + 1e-12
