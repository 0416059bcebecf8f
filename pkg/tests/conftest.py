from amapf.grid import Cell, Instance, Workspace


def ascii_instance(rows, starts, goals) -> Instance:
    """Instance from rows of '.'/'@' text, row 0 at y = 0."""
    obstacles = frozenset(
        Cell(x, y) for y, row in enumerate(rows) for x, ch in enumerate(row) if ch == "@"
    )
    ws = Workspace(len(rows[0]), len(rows), obstacles)
    return Instance(ws, tuple(starts), tuple(goals))


# 5x5 layout whose cheapest matchings (cost 11) collide once at t = 3 while a
# tied matching is collision-free
TIED_CONFLICT_5X5 = {
    "width": 5,
    "height": 5,
    "obstacles": [[0, 0], [2, 0], [3, 4]],
    "starts": [[4, 4], [3, 3], [4, 2], [3, 0]],
    "goals": [[4, 1], [1, 4], [2, 3], [1, 2]],
}
