"""Numba kernels for the Monte Carlo campaigns.

Everything latency-critical lives here: the counter-seeded RNG, random-walk
simulation of Brownian crossings and annulus excursions, supercover
rasterization, loop-soup generation with union-find clustering, and the
flood-fill disconnection decision.

Scene conventions
-----------------
A campaign scene is a square Cartesian raster of ``n x n`` cells centered at
the origin, covering [-R, R]^2 with R >= e^{r + margin}; the raster border
("frame") is the proxy for infinity.  Cell side is 2R/n.  Occupancy is
stamp-based: a cell of a uint32 ``stamps`` array counts as occupied for the
current trial iff it equals the trial's stamp value, so grids never need
clearing between trials.

Paths are sampled as fixed-step-length random walks (step ~ one cell); their
trace law matches Brownian motion at scales beyond one raster cell, and all
connectivity decisions are taken at raster resolution by construction.

All kernels are deterministic given their seed arguments.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

U64 = np.uint64
TWO_PI = 6.283185307179586

# ---------------------------------------------------------------------------
# RNG: splitmix64 seeding + xoshiro256++ streams
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _splitmix64(x):
    x = U64(x + U64(0x9E3779B97F4A7C15))
    z = x
    z = U64((z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9))
    z = U64((z ^ (z >> U64(27))) * U64(0x94D049BB133111EB))
    return U64(z ^ (z >> U64(31))), x


@njit(cache=True)
def rng_init(seed, stream):
    """xoshiro256++ state for (master seed, stream index)."""
    state = np.empty(4, dtype=np.uint64)
    x = U64(U64(seed) ^ U64(U64(stream) * U64(0x9E3779B97F4A7C15) + U64(0x632BE59BD9B4E019)))
    for i in range(4):
        z, x = _splitmix64(x)
        state[i] = z
    return state


@njit(cache=True, inline="always")
def rng_u64(s):
    res = U64(s[0] + s[3])
    res = U64(U64((res << U64(23)) | (res >> U64(41))) + s[0])
    t = U64(s[1] << U64(17))
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = U64((s[3] << U64(45)) | (s[3] >> U64(19)))
    return res


@njit(cache=True, inline="always")
def rng_uniform(s):
    # 53-bit mantissa uniform in [0, 1)
    return (rng_u64(s) >> U64(11)) * 1.1102230246251565e-16


@njit(cache=True, inline="always")
def rng_normal2(s):
    """A pair of independent standard normals (Box-Muller)."""
    u1 = rng_uniform(s)
    while u1 <= 1e-300:
        u1 = rng_uniform(s)
    u2 = rng_uniform(s)
    rad = math.sqrt(-2.0 * math.log(u1))
    ang = TWO_PI * u2
    return rad * math.cos(ang), rad * math.sin(ang)


@njit(cache=True)
def rng_poisson(s, lam):
    """Exact Poisson sample via chunked Knuth multiplication.

    Splits lam into chunks of at most 32 so the product method never
    underflows; total cost is O(lam) uniforms, fine at campaign scale.
    """
    total = 0
    remaining = lam
    while remaining > 0.0:
        chunk = remaining if remaining <= 32.0 else 32.0
        remaining -= chunk
        limit = math.exp(-chunk)
        prod = rng_uniform(s)
        k = 0
        while prod > limit:
            prod *= rng_uniform(s)
            k += 1
        total += k
    return total


# Fixed-length walker steps draw their direction from a 4096-entry table;
# the angular quantization (~0.09 deg) is far below raster resolution.
_NANG = 4096
_COS_TAB = np.cos(np.arange(_NANG) * (TWO_PI / _NANG))
_SIN_TAB = np.sin(np.arange(_NANG) * (TWO_PI / _NANG))
_ANG_MASK = U64(_NANG - 1)


# ---------------------------------------------------------------------------
# Supercover marking (flat row-major n x n grid over [-R, R]^2)
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def mark_segment(stamps, stamp, gx0, gy0, gx1, gy1, n):
    """Stamp all cells touched by a segment given in grid coordinates.

    Conservative supercover via half-cell stepping; out-of-grid cells are
    skipped.
    """
    dx = gx1 - gx0
    dy = gy1 - gy0
    span = abs(dx)
    if abs(dy) > span:
        span = abs(dy)
    nsub = 1 + int(2.0 * span)
    inv = 1.0 / nsub
    for m in range(nsub + 1):
        t = m * inv
        i = int(math.floor(gx0 + t * dx))
        if 0 <= i < n:
            j = int(math.floor(gy0 + t * dy))
            if 0 <= j < n:
                stamps[i * n + j] = stamp


@njit(cache=True, inline="always")
def _hits_stamped(stamps, stamp, gx0, gy0, gx1, gy1, n):
    """Does the segment's supercover touch any cell stamped ``stamp``?"""
    dx = gx1 - gx0
    dy = gy1 - gy0
    span = abs(dx)
    if abs(dy) > span:
        span = abs(dy)
    nsub = 1 + int(2.0 * span)
    inv = 1.0 / nsub
    for m in range(nsub + 1):
        t = m * inv
        i = int(math.floor(gx0 + t * dx))
        if 0 <= i < n:
            j = int(math.floor(gy0 + t * dy))
            if 0 <= j < n:
                if stamps[i * n + j] == stamp:
                    return True
    return False


# ---------------------------------------------------------------------------
# Walkers
# ---------------------------------------------------------------------------


@njit(cache=True)
def walk_crossing(state, stamps, stamp, n, R, x0, y0, rho_target, step,
                  max_steps, do_mark, stop_index, rho_mark):
    """Fixed-step random walk from (x0, y0) until |z| >= rho_target.

    If ``do_mark`` the supercover of the polyline is stamped.  The walk
    also records the index of the last step whose segment crossed the
    circle |z| = rho_mark (used for last-visit truncation); if
    ``stop_index`` >= 0 the walk stops after completing that many steps
    (replay of a recorded walk).

    Returns (status, steps, last_hit_step, x_end, y_end): status 1 =
    reached the target circle, 2 = stopped at stop_index, 0 = exceeded
    max_steps.
    """
    inv_cell = n / (2.0 * R)
    x = x0
    y = y0
    rt2 = rho_target * rho_target
    rm2 = rho_mark * rho_mark
    r2 = x * x + y * y
    last_hit = -1
    nsteps = 0
    while nsteps < max_steps:
        if 0 <= stop_index <= nsteps:
            return 2, nsteps, last_hit, x, y
        a = int(rng_u64(state) & _ANG_MASK)
        xn = x + step * _COS_TAB[a]
        yn = y + step * _SIN_TAB[a]
        r2n = xn * xn + yn * yn
        crossed = r2n >= rt2
        if crossed:
            # clip the final sub-step at the target circle (linear approx)
            rr = math.sqrt(r2)
            rrn = math.sqrt(r2n)
            f = (rho_target - rr) / (rrn - rr) if rrn > rr else 1.0
            if f < 0.0:
                f = 0.0
            elif f > 1.0:
                f = 1.0
            xn = x + f * (xn - x)
            yn = y + f * (yn - y)
            r2n = xn * xn + yn * yn
        if (r2 - rm2) * (r2n - rm2) <= 0.0:
            last_hit = nsteps
        if do_mark:
            mark_segment(stamps, stamp,
                         (x + R) * inv_cell, (y + R) * inv_cell,
                         (xn + R) * inv_cell, (yn + R) * inv_cell, n)
        x = xn
        y = yn
        r2 = r2n
        nsteps += 1
        if crossed:
            return 1, nsteps, last_hit, x, y
    return 0, nsteps, last_hit, x, y


@njit(cache=True)
def walk_crossing_check(state, stamps, stamp, n, R, x0, y0, rho_target,
                        step, max_steps):
    """Crossing walk that stops on contact with stamped cells.

    The test particle for conditional avoidance probabilities: returns 1
    if the walk reaches the target circle without its supercover touching
    any cell stamped ``stamp``, 0 on contact, -1 on step-cap attrition.
    """
    inv_cell = n / (2.0 * R)
    x = x0
    y = y0
    rt2 = rho_target * rho_target
    nsteps = 0
    while nsteps < max_steps:
        a = int(rng_u64(state) & _ANG_MASK)
        xn = x + step * _COS_TAB[a]
        yn = y + step * _SIN_TAB[a]
        r2n = xn * xn + yn * yn
        crossed = r2n >= rt2
        if crossed:
            rr = math.sqrt(x * x + y * y)
            rrn = math.sqrt(r2n)
            f = (rho_target - rr) / (rrn - rr) if rrn > rr else 1.0
            if f < 0.0:
                f = 0.0
            elif f > 1.0:
                f = 1.0
            xn = x + f * (xn - x)
            yn = y + f * (yn - y)
        if _hits_stamped(stamps, stamp,
                         (x + R) * inv_cell, (y + R) * inv_cell,
                         (xn + R) * inv_cell, (yn + R) * inv_cell, n):
            return 0
        x = xn
        y = yn
        nsteps += 1
        if crossed:
            return 1
    return -1


@njit(cache=True)
def walk_excursion(state, stamps, stamp, n, R, s, r, theta0, step,
                   max_steps, do_mark, trace_x, trace_y, want_trace):
    """Brownian excursion from C_s to C_r via the Bessel-3 skew product.

    In log coordinates (u, theta) = (log |z|, arg z) the log-radius is the
    modulus of a 3-D Brownian motion started on the radius-s sphere (so it
    never returns below s) and the angle is an independent 1-D Brownian
    motion on the same clock — the trace law of a Brownian path after its
    last visit to C_s, run until it hits C_r.  Steps are fixed-length in
    log coordinates with a radius-adaptive length so the physical
    displacement per step stays ~``step`` (one raster cell): exact in law
    up to the step scale, by Brownian scaling.

    Physical vertices are marked (if ``do_mark``) and/or stored in
    trace_x/trace_y (if ``want_trace``; index 0 is the start point).

    Returns (status, nsteps, x_end, y_end); status 1 = reached C_r,
    0 = step cap exceeded, -2 = trace capacity exceeded.
    """
    inv_cell = n / (2.0 * R)
    w1 = s if s > 0.0 else 1e-12
    w2 = 0.0
    w3 = 0.0
    u = w1
    th = theta0
    px = math.exp(u) * math.cos(th)
    py = math.exp(u) * math.sin(th)
    cap = trace_x.shape[0] if want_trace else 0
    if want_trace:
        trace_x[0] = px
        trace_y[0] = py
    nsteps = 0
    while nsteps < max_steps:
        # per-step log-plane length so that e^u * ell ~ step
        ell = step * math.exp(-u)
        if ell > 0.5:
            ell = 0.5
        ell3 = ell * 1.7320508075688772
        sqrt12h = ell * 3.4641016151377544  # uniform increment, var ell^2
        z = 2.0 * rng_uniform(state) - 1.0
        a = int(rng_u64(state) & _ANG_MASK)
        rho = math.sqrt(max(0.0, 1.0 - z * z))
        w1n = w1 + ell3 * rho * _COS_TAB[a]
        w2n = w2 + ell3 * rho * _SIN_TAB[a]
        w3n = w3 + ell3 * z
        un = math.sqrt(w1n * w1n + w2n * w2n + w3n * w3n)
        thn = th + sqrt12h * (rng_uniform(state) - 0.5)
        crossed = un >= r
        if crossed:
            f = (r - u) / (un - u) if un > u else 1.0
            if f < 0.0:
                f = 0.0
            elif f > 1.0:
                f = 1.0
            un = r
            thn = th + f * (thn - th)
        qx = math.exp(un) * math.cos(thn)
        qy = math.exp(un) * math.sin(thn)
        if do_mark:
            mark_segment(stamps, stamp,
                         (px + R) * inv_cell, (py + R) * inv_cell,
                         (qx + R) * inv_cell, (qy + R) * inv_cell, n)
        w1 = w1n
        w2 = w2n
        w3 = w3n
        u = un
        th = thn
        px = qx
        py = qy
        nsteps += 1
        if want_trace:
            if nsteps >= cap:
                return -2, nsteps, px, py
            trace_x[nsteps] = px
            trace_y[nsteps] = py
        if crossed:
            return 1, nsteps, px, py
    return 0, nsteps, px, py


# ---------------------------------------------------------------------------
# Disconnection decision (depth-first flood fill)
# ---------------------------------------------------------------------------


@njit(cache=True)
def circle_cells(n, R, rho, out):
    """Indices of the cells whose square intersects the circle |z| = rho.

    Returns the number of indices written to ``out``.
    """
    cell = 2.0 * R / n
    count = 0
    half_diag = 0.7071067811865476 * cell
    for i in range(n):
        cx = -R + (i + 0.5) * cell
        for j in range(n):
            cy = -R + (j + 0.5) * cell
            d = math.sqrt(cx * cx + cy * cy)
            if abs(d - rho) <= half_diag:
                out[count] = i * n + j
                count += 1
    return count


@njit(cache=True)
def disconnect_fill(stamps, stamp, seen, seen_stamp, stack, n, src_cells,
                    n_src):
    """Is the source circle cut off from the raster frame?

    Depth-first flood fill over free cells (stamps != stamp) with
    4-connectivity, starting from the free cells among ``src_cells``
    (the cells meeting the inner circle).  Reaching any border cell of
    the grid means a path to infinity exists.  Neighbors are pushed so
    the outward direction (away from the grid center) is explored first,
    which makes connected scenes terminate early.

    Returns 0 = connected, 1 = disconnected, 2 = degenerate (every source
    cell occupied).
    """
    top = 0
    any_free = False
    for q in range(n_src):
        v = src_cells[q]
        if stamps[v] != stamp:
            any_free = True
            if seen[v] != seen_stamp:
                seen[v] = seen_stamp
                stack[top] = v
                top += 1
    if not any_free:
        return 2
    half = n // 2
    while top > 0:
        top -= 1
        v = stack[top]
        i = v // n
        j = v - i * n
        if i == 0 or i == n - 1 or j == 0 or j == n - 1:
            return 0
        # inward neighbors first, outward last (outward pops first)
        if i >= half:
            w = v - n
            if stamps[w] != stamp and seen[w] != seen_stamp:
                seen[w] = seen_stamp
                stack[top] = w
                top += 1
        else:
            w = v + n
            if stamps[w] != stamp and seen[w] != seen_stamp:
                seen[w] = seen_stamp
                stack[top] = w
                top += 1
        if j >= half:
            w = v - 1
            if stamps[w] != stamp and seen[w] != seen_stamp:
                seen[w] = seen_stamp
                stack[top] = w
                top += 1
            w = v + 1
            if stamps[w] != stamp and seen[w] != seen_stamp:
                seen[w] = seen_stamp
                stack[top] = w
                top += 1
        else:
            w = v + 1
            if stamps[w] != stamp and seen[w] != seen_stamp:
                seen[w] = seen_stamp
                stack[top] = w
                top += 1
            w = v - 1
            if stamps[w] != stamp and seen[w] != seen_stamp:
                seen[w] = seen_stamp
                stack[top] = w
                top += 1
        if i >= half:
            w = v + n
            if stamps[w] != stamp and seen[w] != seen_stamp:
                seen[w] = seen_stamp
                stack[top] = w
                top += 1
        else:
            w = v - n
            if stamps[w] != stamp and seen[w] != seen_stamp:
                seen[w] = seen_stamp
                stack[top] = w
                top += 1
    return 1


# ---------------------------------------------------------------------------
# Union-find (shared by the soup clustering kernels)
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def uf_find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True, inline="always")
def uf_union(parent, a, b):
    ra = uf_find(parent, a)
    rb = uf_find(parent, b)
    if ra != rb:
        if ra < rb:
            parent[rb] = ra
        else:
            parent[ra] = rb


# ---------------------------------------------------------------------------
# Loop soup in B_r \ (loops inside B_0): generation + clustering
# ---------------------------------------------------------------------------


@njit(cache=True)
def sample_annulus_soup(state, c, rho_out, t_min, t_max, dt,
                        n, R, owner_id, owner_stamp, stamp,
                        cell_list, loop_off, parent,
                        vbuf_x, vbuf_y):
    """Sample the soup loops relevant to an annulus scene and cluster them.

    Samples the loop measure with intensity c and duration cutoffs
    [t_min, t_max], restricted to loops contained in the ball of radius
    rho_out but not contained in the unit ball: count ~ Poisson of the
    root-measure mass over the rho_out-ball, roots uniform, durations
    with density ~ t^{-2}, Brownian-bridge traces at time step ~dt
    (vertex count capped by the vertex buffer; rare huge loops get
    proportionally coarser polylines).

    Each kept loop's vertices are generated first (so loops violating the
    containment constraints are rejected before touching shared state),
    then supercover-rasterized into the owner grid; loops sharing a cell
    are merged in the union-find ``parent``.

    Returns (n_loops, n_cells, overflow).  cell_list[loop_off[i]:
    loop_off[i+1]] holds the distinct raster cells of loop i.  overflow
    != 0 means a capacity was exhausted and the trial must be discarded.
    """
    inv_cell = n / (2.0 * R)
    mass = c * (rho_out * rho_out / 2.0) * (1.0 / t_min - 1.0 / t_max)
    n_target = rng_poisson(state, mass)
    max_loops = parent.shape[0]
    max_cells = cell_list.shape[0]
    vcap = vbuf_x.shape[0]
    n_loops = 0
    n_cells = 0
    loop_off[0] = 0
    ro2 = rho_out * rho_out
    for _ in range(n_target):
        # root uniform in the rho_out-ball
        rad = rho_out * math.sqrt(rng_uniform(state))
        a = int(rng_u64(state) & _ANG_MASK)
        x0 = rad * _COS_TAB[a]
        y0 = rad * _SIN_TAB[a]
        # duration density ~ t^-2 on [t_min, t_max]
        uu = rng_uniform(state)
        t = t_min / (1.0 - uu * (1.0 - t_min / t_max))
        nsteps = int(t / dt) + 1
        if nsteps < 8:
            nsteps = 8
        elif nsteps > vcap - 1:
            nsteps = vcap - 1
        dtl = t / nsteps
        # pass 1: generate the bridge, check containment
        x = x0
        y = y0
        vbuf_x[0] = x0
        vbuf_y[0] = y0
        ok = True
        rmax2 = rad * rad
        for m in range(1, nsteps + 1):
            remain = nsteps + 1 - m
            if remain > 1:
                sd = math.sqrt(dtl * (remain - 1) / remain)
                g1, g2 = rng_normal2(state)
                x = x + (x0 - x) / remain + sd * g1
                y = y + (y0 - y) / remain + sd * g2
            else:
                x = x0
                y = y0
            r2 = x * x + y * y
            if r2 > ro2:
                ok = False  # loop exits B_r: not in the restricted soup
                break
            if r2 > rmax2:
                rmax2 = r2
            vbuf_x[m] = x
            vbuf_y[m] = y
        if not ok or rmax2 <= 1.0:
            continue  # exits the outer ball, or contained in the unit ball
        if n_loops >= max_loops:
            return n_loops, n_cells, 1
        # pass 2: rasterize and cluster
        lid = n_loops
        overflow = False
        for m in range(nsteps):
            gx0 = (vbuf_x[m] + R) * inv_cell
            gy0 = (vbuf_y[m] + R) * inv_cell
            gx1 = (vbuf_x[m + 1] + R) * inv_cell
            gy1 = (vbuf_y[m + 1] + R) * inv_cell
            ddx = gx1 - gx0
            ddy = gy1 - gy0
            span = abs(ddx)
            if abs(ddy) > span:
                span = abs(ddy)
            nsub = 1 + int(2.0 * span)
            invs = 1.0 / nsub
            for q in range(nsub + 1):
                tt = q * invs
                gi = int(math.floor(gx0 + tt * ddx))
                if gi < 0 or gi >= n:
                    continue
                gj = int(math.floor(gy0 + tt * ddy))
                if gj < 0 or gj >= n:
                    continue
                idx = gi * n + gj
                if owner_stamp[idx] == stamp:
                    prev = owner_id[idx]
                    if prev != lid:
                        uf_union(parent, prev, lid)
                        owner_id[idx] = lid
                else:
                    owner_stamp[idx] = stamp
                    owner_id[idx] = lid
                    if n_cells >= max_cells:
                        overflow = True
                        break
                    cell_list[n_cells] = idx
                    n_cells += 1
            if overflow:
                break
        if overflow:
            return n_loops, n_cells, 1
        n_loops += 1
        loop_off[n_loops] = n_cells
    return n_loops, n_cells, 0


@njit(cache=True)
def attach_and_mark(stamps, stamp, n_loops, cell_list, loop_off,
                    parent, attached_root):
    """Stamp every cluster that touches already-stamped obstacle cells.

    One hop suffices because clusters are already transitively closed
    within the soup.  Returns the number of attached loops.
    """
    for i in range(n_loops):
        attached_root[i] = 0
    for i in range(n_loops):
        for q in range(loop_off[i], loop_off[i + 1]):
            if stamps[cell_list[q]] == stamp:
                attached_root[uf_find(parent, i)] = 1
                break
    n_attached = 0
    for i in range(n_loops):
        if attached_root[uf_find(parent, i)] == 1:
            n_attached += 1
            for q in range(loop_off[i], loop_off[i + 1]):
                stamps[cell_list[q]] = stamp
    return n_attached


# ---------------------------------------------------------------------------
# Batched campaign trials
# ---------------------------------------------------------------------------


@njit(cache=True)
def _soup_buffers(c, n, R, rho_out, t_min, t_max):
    """Allocate soup working buffers sized from the expected loop count."""
    mass = c * (rho_out * rho_out / 2.0) * (1.0 / t_min - 1.0 / t_max)
    max_loops = int(mass * 1.25) + 4096
    # mean vertices per loop ~ 8*ln(t_max/t_min); distinct cells <= vertices
    mean_v = 8.0 * math.log(t_max / t_min) + 16.0
    max_cells = int(max_loops * mean_v * 1.5) + 65536
    owner_id = np.zeros(n * n, dtype=np.int32)
    owner_stamp = np.zeros(n * n, dtype=np.uint32)
    cell_list = np.empty(max_cells, dtype=np.int32)
    loop_off = np.empty(max_loops + 1, dtype=np.int64)
    parent = np.empty(max_loops, dtype=np.int32)
    attached_root = np.empty(max_loops, dtype=np.uint8)
    vbuf_x = np.empty(131073, dtype=np.float64)
    vbuf_y = np.empty(131073, dtype=np.float64)
    return (owner_id, owner_stamp, cell_list, loop_off, parent,
            attached_root, vbuf_x, vbuf_y)


@njit(cache=True)
def run_p0_batch(seed, trial_start, ntrials, k, c, r, n, margin,
                 step_factor, tmin_factor, tmax_base, use_excursions,
                 outcomes):
    """Non-disconnection trials for p(c, k, r, 0) and its excursion variant.

    Per trial: k independent crossings from uniform points on C_0 to C_r
    (full Brownian paths, or Brownian excursions when ``use_excursions``);
    for c > 0 an independent soup in B_r whose crossing-touching clusters
    are attached; then the flood-fill verdict for C_0 against the frame.

    Soup cutoffs: t_min = tmin_factor * cell^2, t_max = (tmax_base e^r)^2.

    outcomes[t] = 1 not disconnected, 0 disconnected, -1 walker step cap
    exceeded, -2 degenerate scene, -3 soup capacity overflow.
    """
    R = math.exp(r + margin)
    cell = 2.0 * R / n
    step = step_factor * cell
    rho = math.exp(r)
    max_steps = np.int64(40.0 * math.exp(2.0 * r) / (step * step)) + 100000
    stamps = np.zeros(n * n, dtype=np.uint32)
    seen = np.zeros(n * n, dtype=np.uint32)
    stack = np.empty(n * n, dtype=np.int32)
    src = np.empty(8 * n + 64, dtype=np.int32)
    n_src = circle_cells(n, R, 1.0, src)
    use_soup = c > 0.0
    t_min = tmin_factor * cell * cell
    t_max = (tmax_base * rho) ** 2
    dt = t_min / 8.0
    if use_soup:
        (owner_id, owner_stamp, cell_list, loop_off, parent,
         attached_root, vbuf_x, vbuf_y) = _soup_buffers(
            c, n, R, rho, t_min, t_max)
    else:
        (owner_id, owner_stamp, cell_list, loop_off, parent,
         attached_root, vbuf_x, vbuf_y) = _soup_buffers(
            0.0, 4, 1.0, 1.0, 0.5, 1.0)
    dummy = np.empty(1, dtype=np.float64)
    for t in range(ntrials):
        stamp = np.uint32(t + 1)
        st = rng_init(seed, trial_start + t)
        ok = True
        for _ in range(k):
            a = int(rng_u64(st) & _ANG_MASK)
            if use_excursions:
                status, _, _, _ = walk_excursion(
                    st, stamps, stamp, n, R, 0.0, r,
                    TWO_PI * rng_uniform(st), step, max_steps,
                    True, dummy, dummy, False)
            else:
                status, _, _, _, _ = walk_crossing(
                    st, stamps, stamp, n, R, _COS_TAB[a], _SIN_TAB[a],
                    rho, step, max_steps, True, -1, 1.0)
            if status != 1:
                ok = False
                break
        if not ok:
            outcomes[t] = -1
            continue
        if use_soup:
            for i in range(parent.shape[0]):
                parent[i] = i
            nl, _, overflow = sample_annulus_soup(
                st, c, rho, t_min, t_max, dt, n, R,
                owner_id, owner_stamp, stamp,
                cell_list, loop_off, parent, vbuf_x, vbuf_y)
            if overflow != 0:
                outcomes[t] = -3
                continue
            attach_and_mark(stamps, stamp, nl, cell_list, loop_off,
                            parent, attached_root)
        code = disconnect_fill(stamps, stamp, seen, stamp, stack, n,
                               src, n_src)
        if code == 0:
            outcomes[t] = 1
        elif code == 1:
            outcomes[t] = 0
        else:
            outcomes[t] = -2
    return 0


@njit(cache=True)
def run_last_visit_batch(seed, trial_start, ntrials, r, n, margin,
                         step_factor, outcomes):
    """Non-disconnection trials for a Brownian motion started at 1, run to
    C_r, and truncated at its last visit to C_0.

    Each trial replays the same walk twice with an identical stream: the
    first pass records the index of the last step touching C_0, the
    second marks only the trace up to that step.  Outcome codes as in
    run_p0_batch.
    """
    R = math.exp(r + margin)
    cell = 2.0 * R / n
    step = step_factor * cell
    rho = math.exp(r)
    max_steps = np.int64(40.0 * math.exp(2.0 * r) / (step * step)) + 100000
    stamps = np.zeros(n * n, dtype=np.uint32)
    seen = np.zeros(n * n, dtype=np.uint32)
    stack = np.empty(n * n, dtype=np.int32)
    src = np.empty(8 * n + 64, dtype=np.int32)
    n_src = circle_cells(n, R, 1.0, src)
    unused = np.uint32(0xFFFFFFFF)
    for t in range(ntrials):
        stamp = np.uint32(t + 1)
        st = rng_init(seed, trial_start + t)
        status, _, last_hit, _, _ = walk_crossing(
            st, stamps, unused, n, R, 1.0, 0.0, rho, step, max_steps,
            False, -1, 1.0)
        if status != 1:
            outcomes[t] = -1
            continue
        st2 = rng_init(seed, trial_start + t)
        walk_crossing(
            st2, stamps, stamp, n, R, 1.0, 0.0, rho, step, max_steps,
            True, last_hit + 1, 1.0)
        code = disconnect_fill(stamps, stamp, seen, stamp, stack, n,
                               src, n_src)
        if code == 0:
            outcomes[t] = 1
        elif code == 1:
            outcomes[t] = 0
        else:
            outcomes[t] = -2
    return 0


@njit(cache=True)
def run_avoid_batch(seed, trial_start, ntrials, k, c, r, m_inner, n,
                    margin, step_factor, tmin_factor, tmax_base,
                    avoid_counts, inner_attrition):
    """Conditional-avoidance trials for the moments of Z_r.

    Per trial: build the obstacle configuration (k crossings + attached
    clusters for c > 0), then launch m_inner independent test crossings
    from uniform points on C_0 and count how many reach C_r without
    touching the obstacle.  avoid_counts[t] = count, or -1 / -3 on
    obstacle-stage attrition / soup overflow.  Inner walks that hit the
    step cap are tallied in inner_attrition (and not as avoidances).
    """
    R = math.exp(r + margin)
    cell = 2.0 * R / n
    step = step_factor * cell
    rho = math.exp(r)
    max_steps = np.int64(40.0 * math.exp(2.0 * r) / (step * step)) + 100000
    stamps = np.zeros(n * n, dtype=np.uint32)
    use_soup = c > 0.0
    t_min = tmin_factor * cell * cell
    t_max = (tmax_base * rho) ** 2
    dt = t_min / 8.0
    if use_soup:
        (owner_id, owner_stamp, cell_list, loop_off, parent,
         attached_root, vbuf_x, vbuf_y) = _soup_buffers(
            c, n, R, rho, t_min, t_max)
    else:
        (owner_id, owner_stamp, cell_list, loop_off, parent,
         attached_root, vbuf_x, vbuf_y) = _soup_buffers(
            0.0, 4, 1.0, 1.0, 0.5, 1.0)
    for t in range(ntrials):
        stamp = np.uint32(t + 1)
        st = rng_init(seed, trial_start + t)
        ok = True
        for _ in range(k):
            a = int(rng_u64(st) & _ANG_MASK)
            status, _, _, _, _ = walk_crossing(
                st, stamps, stamp, n, R, _COS_TAB[a], _SIN_TAB[a],
                rho, step, max_steps, True, -1, 1.0)
            if status != 1:
                ok = False
                break
        if not ok:
            avoid_counts[t] = -1
            continue
        if use_soup:
            for i in range(parent.shape[0]):
                parent[i] = i
            nl, _, overflow = sample_annulus_soup(
                st, c, rho, t_min, t_max, dt, n, R,
                owner_id, owner_stamp, stamp,
                cell_list, loop_off, parent, vbuf_x, vbuf_y)
            if overflow != 0:
                avoid_counts[t] = -3
                continue
            attach_and_mark(stamps, stamp, nl, cell_list, loop_off,
                            parent, attached_root)
        count = 0
        for _ in range(m_inner):
            a = int(rng_u64(st) & _ANG_MASK)
            res = walk_crossing_check(
                st, stamps, stamp, n, R, _COS_TAB[a], _SIN_TAB[a],
                rho, step, max_steps)
            if res == 1:
                count += 1
            elif res == -1:
                inner_attrition[t] += 1
        avoid_counts[t] = count
    return 0


# ---------------------------------------------------------------------------
# Generic Cartesian raster helpers
# ---------------------------------------------------------------------------


@njit(cache=True)
def mark_polyline(xs, ys, grid, x_orig, y_orig, inv_h, ngx, ngy):
    """Supercover-mark a polyline into a flat Cartesian uint8 grid."""
    m = xs.shape[0]
    px = (xs[0] - x_orig) * inv_h
    py = (ys[0] - y_orig) * inv_h
    if m == 1:
        i = int(math.floor(px))
        j = int(math.floor(py))
        if 0 <= i < ngx and 0 <= j < ngy:
            grid[i * ngy + j] = 1
        return 0
    for v in range(1, m):
        qx = (xs[v] - x_orig) * inv_h
        qy = (ys[v] - y_orig) * inv_h
        dx = qx - px
        dy = qy - py
        span = abs(dx)
        if abs(dy) > span:
            span = abs(dy)
        nsub = 1 + int(2.0 * span)
        inv = 1.0 / nsub
        for q in range(nsub + 1):
            t = q * inv
            i = int(math.floor(px + t * dx))
            j = int(math.floor(py + t * dy))
            if 0 <= i < ngx and 0 <= j < ngy:
                grid[i * ngy + j] = 1
        px = qx
        py = qy
    return 0


@njit(cache=True)
def collect_polyline_cells(xs, ys, x_orig, y_orig, inv_h, ngx, ngy,
                           stamps, stamp, out_cells):
    """Distinct supercover cells of a polyline, in visit order.

    Returns the number of cells written to out_cells (or -1 on overflow).
    ``stamps`` deduplicates; cells outside the grid are skipped.
    """
    m = xs.shape[0]
    cap = out_cells.shape[0]
    count = 0
    px = (xs[0] - x_orig) * inv_h
    py = (ys[0] - y_orig) * inv_h
    for v in range(1, m):
        qx = (xs[v] - x_orig) * inv_h
        qy = (ys[v] - y_orig) * inv_h
        dx = qx - px
        dy = qy - py
        span = abs(dx)
        if abs(dy) > span:
            span = abs(dy)
        nsub = 1 + int(2.0 * span)
        inv = 1.0 / nsub
        for q in range(nsub + 1):
            t = q * inv
            i = int(math.floor(px + t * dx))
            j = int(math.floor(py + t * dy))
            if 0 <= i < ngx and 0 <= j < ngy:
                idx = i * ngy + j
                if stamps[idx] != stamp:
                    stamps[idx] = stamp
                    if count >= cap:
                        return -1
                    out_cells[count] = idx
                    count += 1
        px = qx
        py = qy
    return count


@njit(cache=True)
def exterior_reachable(grid, reach, stack, ngx, ngy):
    """Flood-fill free cells reachable from the grid border (4-conn)."""
    top = 0
    for i in range(ngx):
        for jj in range(2):
            j = 0 if jj == 0 else ngy - 1
            v = i * ngy + j
            if grid[v] == 0 and reach[v] == 0:
                reach[v] = 1
                stack[top] = v
                top += 1
    for j in range(ngy):
        for ii in range(2):
            i = 0 if ii == 0 else ngx - 1
            v = i * ngy + j
            if grid[v] == 0 and reach[v] == 0:
                reach[v] = 1
                stack[top] = v
                top += 1
    while top > 0:
        top -= 1
        v = stack[top]
        i = v // ngy
        j = v - i * ngy
        if i > 0:
            w = v - ngy
            if grid[w] == 0 and reach[w] == 0:
                reach[w] = 1
                stack[top] = w
                top += 1
        if i < ngx - 1:
            w = v + ngy
            if grid[w] == 0 and reach[w] == 0:
                reach[w] = 1
                stack[top] = w
                top += 1
        if j > 0:
            w = v - 1
            if grid[w] == 0 and reach[w] == 0:
                reach[w] = 1
                stack[top] = w
                top += 1
        if j < ngy - 1:
            w = v + 1
            if grid[w] == 0 and reach[w] == 0:
                reach[w] = 1
                stack[top] = w
                top += 1
    return 0


# ---------------------------------------------------------------------------
# (k, n)-square scheme kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def square_entries(xs, ys, half_side, n_level, entry_sq, entry_time):
    """Entry events of a trajectory into the dyadic squares of level n.

    The central square [-half_side, half_side]^2 is tiled by squares of
    side 2^{-n}.  An entry event is a vertex inside the tiling whose
    predecessor was in a different square (or outside).  Returns the
    number of events written (-1 on overflow).

    Square ids are row-major: q = ix * nside + iy with
    ix = floor((x + half_side) * 2^n) clipped to the tiling and
    nside = 2 * half_side * 2^n.
    """
    scale = float(1 << n_level)
    nside = int(round(2.0 * half_side * scale))
    cap = entry_sq.shape[0]
    count = 0
    prev = -1
    m = xs.shape[0]
    for v in range(m):
        x = xs[v]
        y = ys[v]
        if x < -half_side or x >= half_side or y < -half_side or y >= half_side:
            prev = -1
            continue
        ix = int((x + half_side) * scale)
        iy = int((y + half_side) * scale)
        if ix >= nside:
            ix = nside - 1
        if iy >= nside:
            iy = nside - 1
        q = ix * nside + iy
        if q != prev:
            if count >= cap:
                return -1
            entry_sq[count] = q
            entry_time[count] = v
            count += 1
            prev = q
    return count


@njit(cache=True)
def block_extrema(xs, block, bmax, bmin):
    """Per-block max/min of a series (block size ``block``)."""
    m = xs.shape[0]
    nb = bmax.shape[0]
    for b in range(nb):
        lo = b * block
        hi = lo + block
        if hi > m:
            hi = m
        mx = -1e300
        mn = 1e300
        for v in range(lo, hi):
            val = xs[v]
            if val > mx:
                mx = val
            if val < mn:
                mn = val
        bmax[b] = mx
        bmin[b] = mn
    return 0


@njit(cache=True, inline="always")
def _first_exit_after(xs, ys, bxmax, bxmin, bymax, bymin, block,
                      t0, cx, cy, radius):
    """First vertex index > t0 with Chebyshev distance >= radius from
    (cx, cy); -1 if none.  Chebyshev <= Euclidean, so this is a
    conservative (late-or-never) exit detector."""
    m = xs.shape[0]
    nb = bxmax.shape[0]
    b = (t0 + 1) // block
    while b < nb:
        possible = bxmax[b] - cx
        v = cx - bxmin[b]
        if v > possible:
            possible = v
        v = bymax[b] - cy
        if v > possible:
            possible = v
        v = cy - bymin[b]
        if v > possible:
            possible = v
        if possible >= radius:
            lo = b * block
            if lo <= t0:
                lo = t0 + 1
            hi = (b + 1) * block
            if hi > m:
                hi = m
            for w in range(lo, hi):
                dx = xs[w] - cx
                if dx < 0.0:
                    dx = -dx
                dy = ys[w] - cy
                if dy < 0.0:
                    dy = -dy
                d = dx if dx > dy else dy
                if d >= radius:
                    return w
        b += 1
    return -1


@njit(cache=True)
def count_visit_phases(xs, ys, entry_sq, entry_time, entry_off,
                       square_ids, k_phases, half_side, n_level, j_level,
                       bxmax, bxmin, bymax, bymin, block, phase_out):
    """Number of completed visit phases per square, capped at k_phases.

    A square S completes phase p when the trajectory has visited S p
    times, each consecutive pair of counted visits separated by an
    excursion to distance 2^{-j} - 2^{-n}/sqrt(2) from the center of S
    (Chebyshev lower bound on the Euclidean distance, so phases are
    counted conservatively).  phase_out[si] >= k_phases means the k-fold
    alternating visit functional fires for square_ids[si].

    entry_sq/entry_time must be grouped by square: the events of
    square_ids[si] occupy [entry_off[si], entry_off[si + 1]).
    """
    scale = float(1 << n_level)
    nside = int(round(2.0 * half_side * scale))
    radius = 2.0 ** (-j_level) - 2.0 ** (-n_level) / 1.4142135623730951
    side = 2.0 ** (-n_level)
    nsq = square_ids.shape[0]
    for si in range(nsq):
        q = square_ids[si]
        ix = q // nside
        iy = q - ix * nside
        cx = -half_side + (ix + 0.5) * side
        cy = -half_side + (iy + 0.5) * side
        lo = entry_off[si]
        hi = entry_off[si + 1]
        phases = 1  # first visit
        t_cur = entry_time[lo]
        ei = lo + 1
        while phases < k_phases:
            ex = _first_exit_after(xs, ys, bxmax, bxmin, bymax, bymin,
                                   block, t_cur, cx, cy, radius)
            if ex < 0:
                break
            # first recorded entry at or after the exit time
            while ei < hi and entry_time[ei] < ex:
                ei += 1
            if ei >= hi:
                break
            phases += 1
            t_cur = entry_time[ei]
            ei += 1
        phase_out[si] = phases
    return 0
