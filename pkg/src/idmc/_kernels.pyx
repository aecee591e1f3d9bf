#cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernel.

Twin of ``_kernels_py``: identical flat program layout and identical
draw-for-draw use of the PCG64 streams, so outputs are bit-identical
with the pure-Python fallback for the same seeds.
"""
import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t

COMPILED = True

STATUS_OK = 0
STATUS_BUDGET = 1
STATUS_ZERO_MASS = 2

DEF MAX_DOM = 4096


cdef inline bitgen_t* _bitgen(object bg):
    return <bitgen_t*> PyCapsule_GetPointer(bg.capsule, "BitGenerator")


cdef bint _forward_once(bitgen_t *bg, int *s,
                        const int[::1] dom,
                        const int[::1] step_kind, const int[::1] step_idx,
                        const int[::1] fwd_scope_off, const int[::1] fwd_scope,
                        const long long[::1] fwd_off, const double[::1] fwd_data,
                        const int[::1] fac_scope_off, const int[::1] fac_scope,
                        const long long[::1] fac_off, const double[::1] fac_data,
                        const int[::1] acc) noexcept nogil:
    cdef int t, j, k, v, var, chosen, fid, a
    cdef long long idx, base
    cdef double u, accum
    for t in range(step_kind.shape[0]):
        if step_kind[t] == 0:
            j = step_idx[t]
            idx = 0
            for k in range(fwd_scope_off[j], fwd_scope_off[j + 1]):
                var = fwd_scope[k]
                idx = idx * dom[var] + s[var]
            base = fwd_off[j] + idx * dom[j]
            u = bg.next_double(bg.state)
            accum = 0.0
            chosen = -1
            for v in range(dom[j]):
                accum += fwd_data[base + v]
                if u < accum:
                    chosen = v
                    break
            if chosen < 0:
                return False
            s[j] = chosen
        else:
            fid = step_idx[t]
            idx = 0
            for k in range(fac_scope_off[fid], fac_scope_off[fid + 1]):
                var = fac_scope[k]
                idx = idx * dom[var] + s[var]
            if bg.next_double(bg.state) >= fac_data[fac_off[fid] + idx]:
                return False
    for a in range(acc.shape[0]):
        fid = acc[a]
        idx = 0
        for k in range(fac_scope_off[fid], fac_scope_off[fid + 1]):
            var = fac_scope[k]
            idx = idx * dom[var] + s[var]
        if fac_data[fac_off[fid] + idx] <= 0.0:
            return False
    return True


cdef int _gibbs_var(bitgen_t *bg, int *s, int j, double *w,
                    const int[::1] dom,
                    const int[::1] fac_scope_off, const int[::1] fac_scope,
                    const long long[::1] fac_off, const double[::1] fac_data,
                    const int[::1] vf_off, const int[::1] vf_fac,
                    const int[::1] vf_pos) noexcept nogil:
    cdef int nv = dom[j]
    cdef int t, fid, q, k, var, v
    cdef long long base, stride, stride_j, off
    cdef double total, u, accum
    for v in range(nv):
        w[v] = 1.0
    for t in range(vf_off[j], vf_off[j + 1]):
        fid = vf_fac[t]
        q = vf_pos[t]
        base = 0
        stride = 1
        stride_j = 1
        for k in range(fac_scope_off[fid + 1] - 1, fac_scope_off[fid] - 1, -1):
            var = fac_scope[k]
            if k - fac_scope_off[fid] == q:
                stride_j = stride
            else:
                base += s[var] * stride
            stride *= dom[var]
        off = fac_off[fid] + base
        for v in range(nv):
            w[v] *= fac_data[off + v * stride_j]
    total = 0.0
    for v in range(nv):
        total += w[v]
    if total <= 0.0:
        return -1
    u = bg.next_double(bg.state) * total
    accum = 0.0
    for v in range(nv):
        accum += w[v]
        if u < accum:
            return v
    return nv - 1


def run_composite(flat, int m, int h, bitgens, int max_rejections,
                  bint random_scan, bint retain_all):
    """Forward-seed then sweep m chains; see sampler.composite_sample."""
    cdef const int[::1] dom = flat.dom_sizes
    cdef const int[::1] step_kind = flat.step_kind
    cdef const int[::1] step_idx = flat.step_idx
    cdef const int[::1] fwd_scope_off = flat.fwd_scope_off
    cdef const int[::1] fwd_scope = flat.fwd_scope
    cdef const long long[::1] fwd_off = flat.fwd_off
    cdef const double[::1] fwd_data = flat.fwd_data
    cdef const int[::1] fac_scope_off = flat.fac_scope_off
    cdef const int[::1] fac_scope = flat.fac_scope
    cdef const long long[::1] fac_off = flat.fac_off
    cdef const double[::1] fac_data = flat.fac_data
    cdef const int[::1] vf_off = flat.vf_off
    cdef const int[::1] vf_fac = flat.vf_fac
    cdef const int[::1] vf_pos = flat.vf_pos
    cdef const int[::1] acc = flat.acc

    cdef int p = dom.shape[0]
    if retain_all:
        states_np = np.zeros((m, h + 1, p), dtype=np.int32)
    else:
        states_np = np.zeros((m, p), dtype=np.int32)
    attempts_np = np.zeros(m, dtype=np.int64)
    changes_np = np.zeros(p, dtype=np.int64)
    cdef int[:, :, ::1] states3 = states_np if retain_all else states_np.reshape(m, 1, p)
    cdef long long[::1] attempts = attempts_np
    cdef long long[::1] changes = changes_np

    cdef int status = 0  # STATUS_OK
    cdef int fail_var = -1
    cdef int done = 0
    cdef int i, t, j, k, r, v, sweep
    cdef bint ok
    cdef double u
    cdef bitgen_t *bg
    cdef int s[MAX_DOM]
    cdef int perm[MAX_DOM]
    cdef double w[MAX_DOM]

    if p > MAX_DOM:
        raise ValueError("too many free variables for the compiled kernel")
    for j in range(p):
        if dom[j] > MAX_DOM:
            raise ValueError("domain too large for the compiled kernel")

    for i in range(m):
        bg = _bitgen(bitgens[i])
        for j in range(p):
            s[j] = 0
        ok = False
        with nogil:
            for t in range(max_rejections):
                attempts[i] += 1
                if _forward_once(bg, s, dom, step_kind, step_idx,
                                 fwd_scope_off, fwd_scope,
                                 fwd_off, fwd_data, fac_scope_off, fac_scope,
                                 fac_off, fac_data, acc):
                    ok = True
                    break
            if ok:
                if retain_all:
                    for j in range(p):
                        states3[i, 0, j] = s[j]
                for j in range(p):
                    perm[j] = j
                for sweep in range(h):
                    if random_scan:
                        for k in range(p - 1, 0, -1):
                            u = bg.next_double(bg.state)
                            r = <int>(u * (k + 1))
                            t = perm[k]
                            perm[k] = perm[r]
                            perm[r] = t
                    for t in range(p):
                        j = perm[t]
                        v = _gibbs_var(bg, s, j, w, dom, fac_scope_off,
                                       fac_scope, fac_off, fac_data,
                                       vf_off, vf_fac, vf_pos)
                        if v < 0:
                            status = 2  # STATUS_ZERO_MASS
                            fail_var = j
                            break
                        if v != s[j]:
                            changes[j] += 1
                        s[j] = v
                    if status != 0:
                        break
                    if retain_all:
                        for j in range(p):
                            states3[i, sweep + 1, j] = s[j]
        if not ok:
            status = 1  # STATUS_BUDGET
            break
        if status != 0:
            break
        if not retain_all:
            for j in range(p):
                states3[i, 0, j] = s[j]
        done += 1
    return {
        "states": states_np,
        "attempts": attempts_np,
        "changes": changes_np,
        "status": status,
        "fail_var": fail_var,
        "done": done,
    }


def run_forward_attempts(flat, int n_attempts, bitgen):
    """Run a fixed number of forward attempts; returns the accepted count."""
    cdef const int[::1] dom = flat.dom_sizes
    cdef const int[::1] step_kind = flat.step_kind
    cdef const int[::1] step_idx = flat.step_idx
    cdef const int[::1] fwd_scope_off = flat.fwd_scope_off
    cdef const int[::1] fwd_scope = flat.fwd_scope
    cdef const long long[::1] fwd_off = flat.fwd_off
    cdef const double[::1] fwd_data = flat.fwd_data
    cdef const int[::1] fac_scope_off = flat.fac_scope_off
    cdef const int[::1] fac_scope = flat.fac_scope
    cdef const long long[::1] fac_off = flat.fac_off
    cdef const double[::1] fac_data = flat.fac_data
    cdef const int[::1] acc = flat.acc
    cdef int p = dom.shape[0]
    cdef bitgen_t *bg = _bitgen(bitgen)
    cdef int s[MAX_DOM]
    cdef int j
    cdef long long accepted = 0
    cdef long long t
    if p > MAX_DOM:
        raise ValueError("too many free variables for the compiled kernel")
    for j in range(p):
        s[j] = 0
    with nogil:
        for t in range(n_attempts):
            if _forward_once(bg, s, dom, step_kind, step_idx,
                             fwd_scope_off, fwd_scope, fwd_off,
                             fwd_data, fac_scope_off, fac_scope, fac_off,
                             fac_data, acc):
                accepted += 1
    return int(accepted)
