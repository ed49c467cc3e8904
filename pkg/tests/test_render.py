import numpy as np
import pytest

from mesoperc.lattices import builtin_torus, rhombus_domain
from mesoperc.mesh import Triangulation
from mesoperc.packing import pack
from mesoperc.render import Style, render


def test_two_triangles_give_five_lines():
    d = rhombus_domain()
    svg = render(d.triangulation, d.embedding)
    assert svg.count("<line ") == 5
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


def test_byte_identical():
    t, e = builtin_torus("fig1")
    cp, _ = pack(t, e)
    assert render(t, e, cp) == render(t, e, cp)


def test_one_circle_per_vertex():
    t, e = builtin_torus("fig1")
    cp, _ = pack(t, e)
    svg = render(t, e, cp)
    assert svg.count("<circle ") == t.n_vertices
    assert render(t, e, cp, Style(circles=False)).count("<circle ") == 0


def test_fundamental_domain_shading():
    t, e = builtin_torus("regular")
    assert render(t, e).count("<polygon") == 1
    assert render(t, e, style=Style(shade_fundamental=False)).count("<polygon") == 0
    d = rhombus_domain()
    assert "<polygon" not in render(d.triangulation, d.embedding)


def test_empty_geometry():
    t = Triangulation(np.zeros((0, 3), dtype=int), 0, "disk")
    with pytest.raises(ValueError, match="empty geometry"):
        render(t)
