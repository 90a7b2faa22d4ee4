"""Pure-Python fluid kernel (fallback for the compiled ``_fluid`` extension).

Flows are given in CSR form: flow ``f`` uses links
``flow_links[flow_ptr[f]:flow_ptr[f + 1]]``. Sizes are in bits, capacities in
bits/s, times in seconds.
"""

import math

FINISH_RTOL = 1e-12


def _maxmin(cap, ptr, idx, active, rates):
    n_links = len(cap)
    rem = list(cap)
    cnt = [0] * n_links
    users = [[] for _ in range(n_links)]
    for f in active:
        for j in range(ptr[f], ptr[f + 1]):
            l = idx[j]
            cnt[l] += 1
            users[l].append(f)
    frozen = set()
    left = len(active)
    while left:
        best_l = -1
        best = math.inf
        for l in range(n_links):
            c = cnt[l]
            if c:
                s = rem[l] / c
                if s < best:
                    best = s
                    best_l = l
        if best_l < 0:
            break
        if best < 0.0:
            best = 0.0
        for f in users[best_l]:
            if f in frozen:
                continue
            frozen.add(f)
            left -= 1
            rates[f] = best
            for j in range(ptr[f], ptr[f + 1]):
                l = idx[j]
                rem[l] -= best
                cnt[l] -= 1
    return rates


def maxmin_rates(capacity, flow_ptr, flow_links, active):
    """Max-min fair rates of the ``active`` flows; inactive flows get 0."""
    cap = [float(c) for c in capacity]
    ptr = [int(p) for p in flow_ptr]
    idx = [int(i) for i in flow_links]
    rates = [0.0] * (len(ptr) - 1)
    _maxmin(cap, ptr, idx, [int(f) for f in active], rates)
    return rates


def simulate(capacity, flow_ptr, flow_links, sizes, starts, record=False):
    """Event-driven max-min fluid simulation.

    Returns ``(finish_times, epochs)``. ``finish_times[f]`` is ``inf`` for a
    flow crossing a zero-capacity link. With ``record`` set, ``epochs`` lists
    ``(t, flow_ids, rates)`` for every allocation epoch, else it is None.
    """
    cap = [float(c) for c in capacity]
    ptr = [int(p) for p in flow_ptr]
    idx = [int(i) for i in flow_links]
    size = [float(s) for s in sizes]
    start = [float(s) for s in starts]
    n = len(size)
    finish = [math.nan] * n
    remaining = list(size)
    rates = [0.0] * n
    epochs = [] if record else None

    pending = []
    for f in sorted(range(n), key=lambda f: (start[f], f)):
        lo, hi = ptr[f], ptr[f + 1]
        if any(cap[idx[j]] <= 0.0 for j in range(lo, hi)):
            finish[f] = math.inf
        elif lo == hi or size[f] <= 0.0:
            finish[f] = start[f]
        else:
            pending.append(f)

    nxt = 0
    active = []
    t = 0.0
    while nxt < len(pending) or active:
        if not active:
            t = start[pending[nxt]]
        while nxt < len(pending) and start[pending[nxt]] <= t:
            active.append(pending[nxt])
            nxt += 1
        _maxmin(cap, ptr, idx, active, rates)
        if record:
            epochs.append((t, list(active), [rates[f] for f in active]))

        dt = math.inf
        for f in active:
            r = rates[f]
            if r > 0.0:
                ttf = remaining[f] / r
                if ttf < dt:
                    dt = ttf
        arrival = nxt < len(pending) and start[pending[nxt]] - t <= dt
        if arrival:
            t_new = start[pending[nxt]]
            dt = t_new - t
        elif dt == math.inf:
            for f in active:
                finish[f] = math.inf
            active = []
            continue
        else:
            t_new = t + dt
        limit = dt * (1.0 + FINISH_RTOL)
        still = []
        for f in active:
            r = rates[f]
            if r > 0.0 and remaining[f] / r <= limit:
                remaining[f] = 0.0
                finish[f] = t_new
            else:
                remaining[f] -= r * dt
                still.append(f)
        active = still
        t = t_new
    return finish, epochs
