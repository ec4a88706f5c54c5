"""Pure-Python CRF kernels, arithmetically identical to the Cython backend.

Inputs are C-contiguous float64/int32 arrays shaped:
  unary  (H, W, K)   per-pixel class costs
  wr     (H, W-1)    horizontal edge weights, edge (y,x)-(y,x+1) at [y, x]
  wd     (H-1, W)    vertical edge weights, edge (y,x)-(y+1,x) at [y, x]
  labels (H, W)      current labeling, mutated in place by icm_sweep

Neighbor contributions accumulate in the fixed order left, right, up, down;
energies sum unary terms in raster order, then horizontal edges, then
vertical edges.  The Cython backend follows the same order so both produce
bit-identical doubles.
"""


def icm_sweep(unary, wr, wd, coupling, labels):
    """One raster-order sweep; each pixel takes its locally cheapest label
    (ties to the smaller label).  Returns the number of changed pixels."""
    h, w, k = unary.shape
    u = unary.ravel().tolist()
    wrf = wr.ravel().tolist()
    wdf = wd.ravel().tolist()
    lab = labels.ravel().tolist()
    wm1 = w - 1
    changes = 0
    for y in range(h):
        row = y * w
        for x in range(w):
            i = row + x
            base = i * k
            best = 0
            best_cost = 0.0
            for kk in range(k):
                s = 0.0
                if x > 0 and lab[i - 1] != kk:
                    s += wrf[y * wm1 + x - 1]
                if x < wm1 and lab[i + 1] != kk:
                    s += wrf[y * wm1 + x]
                if y > 0 and lab[i - w] != kk:
                    s += wdf[i - w]
                if y < h - 1 and lab[i + w] != kk:
                    s += wdf[i]
                cost = u[base + kk] + coupling * s
                if kk == 0 or cost < best_cost:
                    best = kk
                    best_cost = cost
            if best != lab[i]:
                lab[i] = best
                changes += 1
    labels.reshape(-1)[:] = lab
    return changes


def grid_energy(unary, wr, wd, coupling, labels):
    """Total labeling energy: sum of per-pixel unary costs plus coupling
    times the weight of label-disagreeing edges."""
    h, w, k = unary.shape
    u = unary.ravel().tolist()
    wrf = wr.ravel().tolist()
    wdf = wd.ravel().tolist()
    lab = labels.ravel().tolist()
    unary_total = 0.0
    for i in range(h * w):
        unary_total += u[i * k + lab[i]]
    horizontal = 0.0
    wm1 = w - 1
    for y in range(h):
        row = y * w
        for x in range(wm1):
            if lab[row + x] != lab[row + x + 1]:
                horizontal += wrf[y * wm1 + x]
    vertical = 0.0
    for i in range((h - 1) * w):
        if lab[i] != lab[i + w]:
            vertical += wdf[i]
    return unary_total + coupling * (horizontal + vertical)
