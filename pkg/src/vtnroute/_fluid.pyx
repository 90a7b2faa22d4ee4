# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled fluid kernel; same contract as ``vtnroute._fluid_py``."""

import numpy as np

from libc.math cimport INFINITY, NAN

cdef double FINISH_RTOL = 1e-12


cdef void _maxmin(const double[:] cap, const long long[:] ptr, const long long[:] idx,
                  long long[:] active, Py_ssize_t n_active,
                  double[:] rates, double[:] rem, long long[:] cnt,
                  long long[:] uptr, long long[:] ufl, long long[:] fill,
                  signed char[:] frozen) noexcept:
    cdef Py_ssize_t n_links = cap.shape[0]
    cdef Py_ssize_t i, j, l, f, a, best_l
    cdef long long left
    cdef double best, s

    for l in range(n_links):
        rem[l] = cap[l]
        cnt[l] = 0
    for a in range(n_active):
        f = active[a]
        frozen[f] = 0
        for j in range(ptr[f], ptr[f + 1]):
            cnt[idx[j]] += 1
    uptr[0] = 0
    for l in range(n_links):
        uptr[l + 1] = uptr[l] + cnt[l]
        fill[l] = uptr[l]
    for a in range(n_active):
        f = active[a]
        for j in range(ptr[f], ptr[f + 1]):
            l = idx[j]
            ufl[fill[l]] = f
            fill[l] += 1

    left = n_active
    while left > 0:
        best_l = -1
        best = INFINITY
        for l in range(n_links):
            if cnt[l] > 0:
                s = rem[l] / cnt[l]
                if s < best:
                    best = s
                    best_l = l
        if best_l < 0:
            break
        if best < 0.0:
            best = 0.0
        for i in range(uptr[best_l], uptr[best_l + 1]):
            f = ufl[i]
            if frozen[f]:
                continue
            frozen[f] = 1
            left -= 1
            rates[f] = best
            for j in range(ptr[f], ptr[f + 1]):
                l = idx[j]
                rem[l] -= best
                cnt[l] -= 1


cdef class _Work:
    cdef public object rem, cnt, uptr, ufl, fill, frozen

    def __init__(self, Py_ssize_t n_links, Py_ssize_t n_flows, Py_ssize_t nnz):
        self.rem = np.empty(n_links, dtype=np.float64)
        self.cnt = np.empty(n_links, dtype=np.int64)
        self.uptr = np.empty(n_links + 1, dtype=np.int64)
        self.ufl = np.empty(max(nnz, 1), dtype=np.int64)
        self.fill = np.empty(n_links, dtype=np.int64)
        self.frozen = np.zeros(max(n_flows, 1), dtype=np.int8)


def maxmin_rates(capacity, flow_ptr, flow_links, active):
    cdef double[:] cap = np.ascontiguousarray(capacity, dtype=np.float64)
    cdef long long[:] ptr = np.ascontiguousarray(flow_ptr, dtype=np.int64)
    cdef long long[:] idx = np.ascontiguousarray(flow_links, dtype=np.int64)
    act_arr = np.ascontiguousarray(active, dtype=np.int64)
    cdef long long[:] act = act_arr
    n_flows = ptr.shape[0] - 1
    rates = np.zeros(n_flows, dtype=np.float64)
    w = _Work(cap.shape[0], n_flows, idx.shape[0])
    _maxmin(cap, ptr, idx, act, act_arr.shape[0], rates, w.rem, w.cnt, w.uptr, w.ufl, w.fill,
            w.frozen.view(np.int8))
    return rates


def simulate(capacity, flow_ptr, flow_links, sizes, starts, record=False):
    cdef double[:] cap = np.ascontiguousarray(capacity, dtype=np.float64)
    cdef long long[:] ptr = np.ascontiguousarray(flow_ptr, dtype=np.int64)
    cdef long long[:] idx = np.ascontiguousarray(flow_links, dtype=np.int64)
    cdef double[:] size = np.ascontiguousarray(sizes, dtype=np.float64)
    start_arr = np.ascontiguousarray(starts, dtype=np.float64)
    cdef double[:] start = start_arr
    cdef Py_ssize_t n = size.shape[0]
    cdef Py_ssize_t f, j, a, k, n_pending = 0, nxt = 0, n_active = 0, n_still
    cdef double t = 0.0, dt, ttf, r, limit, t_new
    cdef bint arrival, starved

    finish_arr = np.full(n, NAN, dtype=np.float64)
    cdef double[:] finish = finish_arr
    rem_arr = np.array(size, dtype=np.float64)
    cdef double[:] remaining = rem_arr
    cdef double[:] rates = np.zeros(max(n, 1), dtype=np.float64)
    pending_arr = np.empty(max(n, 1), dtype=np.int64)
    cdef long long[:] pending = pending_arr
    active_arr = np.empty(max(n, 1), dtype=np.int64)
    cdef long long[:] active = active_arr
    w = _Work(cap.shape[0], n, idx.shape[0])
    cdef double[:] wrem = w.rem
    cdef long long[:] wcnt = w.cnt
    cdef long long[:] wuptr = w.uptr
    cdef long long[:] wufl = w.ufl
    cdef long long[:] wfill = w.fill
    cdef signed char[:] wfrozen = w.frozen.view(np.int8)
    epochs = [] if record else None

    order = np.lexsort((np.arange(n), start_arr))
    for k in range(n):
        f = order[k]
        starved = False
        for j in range(ptr[f], ptr[f + 1]):
            if cap[idx[j]] <= 0.0:
                starved = True
                break
        if starved:
            finish[f] = INFINITY
        elif ptr[f] == ptr[f + 1] or size[f] <= 0.0:
            finish[f] = start[f]
        else:
            pending[n_pending] = f
            n_pending += 1

    while nxt < n_pending or n_active > 0:
        if n_active == 0:
            t = start[pending[nxt]]
        while nxt < n_pending and start[pending[nxt]] <= t:
            active[n_active] = pending[nxt]
            n_active += 1
            nxt += 1
        _maxmin(cap, ptr, idx, active, n_active, rates, wrem, wcnt, wuptr, wufl, wfill, wfrozen)
        if record:
            ids = [active[a] for a in range(n_active)]
            epochs.append((t, ids, [rates[active[a]] for a in range(n_active)]))

        dt = INFINITY
        for a in range(n_active):
            f = active[a]
            r = rates[f]
            if r > 0.0:
                ttf = remaining[f] / r
                if ttf < dt:
                    dt = ttf
        arrival = nxt < n_pending and start[pending[nxt]] - t <= dt
        if arrival:
            t_new = start[pending[nxt]]
            dt = t_new - t
        elif dt == INFINITY:
            for a in range(n_active):
                finish[active[a]] = INFINITY
            n_active = 0
            continue
        else:
            t_new = t + dt
        limit = dt * (1.0 + FINISH_RTOL)
        n_still = 0
        for a in range(n_active):
            f = active[a]
            r = rates[f]
            if r > 0.0 and remaining[f] / r <= limit:
                remaining[f] = 0.0
                finish[f] = t_new
            else:
                remaining[f] -= r * dt
                active[n_still] = f
                n_still += 1
        n_active = n_still
        t = t_new
    return finish_arr, epochs
