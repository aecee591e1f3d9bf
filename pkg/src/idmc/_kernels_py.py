"""Pure-Python sampling kernel.

Drop-in twin of the compiled extension in ``_kernels.pyx``: same flat
program layout, same draw-for-draw use of the bit generator streams, so
both kernels produce bit-identical output for the same seeds.
"""
from __future__ import annotations

import numpy as np
from numpy.random import Generator

COMPILED = False

STATUS_OK = 0
STATUS_BUDGET = 1
STATUS_ZERO_MASS = 2


def _as_lists(flat):
    return (
        flat.dom_sizes.tolist(),
        flat.step_kind.tolist(),
        flat.step_idx.tolist(),
        flat.fwd_scope_off.tolist(),
        flat.fwd_scope.tolist(),
        flat.fwd_off.tolist(),
        flat.fwd_data.tolist(),
        flat.fac_scope_off.tolist(),
        flat.fac_scope.tolist(),
        flat.fac_off.tolist(),
        flat.fac_data.tolist(),
        flat.vf_off.tolist(),
        flat.vf_fac.tolist(),
        flat.vf_pos.tolist(),
        flat.acc.tolist(),
    )


def _forward_once(rand, s, dom, step_kind, step_idx,
                  fwd_scope_off, fwd_scope, fwd_off, fwd_data,
                  fac_scope_off, fac_scope, fac_off, fac_data, acc):
    for t in range(len(step_kind)):
        if step_kind[t] == 0:
            j = step_idx[t]
            idx = 0
            for k in range(fwd_scope_off[j], fwd_scope_off[j + 1]):
                var = fwd_scope[k]
                idx = idx * dom[var] + s[var]
            base = fwd_off[j] + idx * dom[j]
            u = rand()
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
            if rand() >= fac_data[fac_off[fid] + idx]:
                return False
    for fid in acc:
        idx = 0
        for k in range(fac_scope_off[fid], fac_scope_off[fid + 1]):
            var = fac_scope[k]
            idx = idx * dom[var] + s[var]
        if fac_data[fac_off[fid] + idx] <= 0.0:
            return False
    return True


def _gibbs_var(rand, s, j, dom, fac_scope_off, fac_scope, fac_off, fac_data,
               vf_off, vf_fac, vf_pos):
    nv = dom[j]
    w = [1.0] * nv
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
    u = rand() * total
    accum = 0.0
    for v in range(nv):
        accum += w[v]
        if u < accum:
            return v
    return nv - 1


def run_composite(flat, m, h, bitgens, max_rejections, random_scan, retain_all):
    """Forward-seed then sweep m chains; see sampler.composite_sample."""
    (dom, step_kind, step_idx, fwd_scope_off, fwd_scope, fwd_off, fwd_data,
     fac_scope_off, fac_scope, fac_off, fac_data,
     vf_off, vf_fac, vf_pos, acc) = _as_lists(flat)
    p = len(dom)
    states = np.zeros((m, h + 1, p) if retain_all else (m, p), dtype=np.int32)
    attempts = np.zeros(m, dtype=np.int64)
    changes = np.zeros(p, dtype=np.int64)
    status = STATUS_OK
    fail_var = -1
    done = 0
    for i in range(m):
        rand = Generator(bitgens[i]).random
        s = [0] * p
        ok = False
        for _ in range(max_rejections):
            attempts[i] += 1
            if _forward_once(rand, s, dom, step_kind, step_idx,
                             fwd_scope_off, fwd_scope, fwd_off, fwd_data,
                             fac_scope_off, fac_scope, fac_off,
                             fac_data, acc):
                ok = True
                break
        if not ok:
            status = STATUS_BUDGET
            break
        if retain_all:
            states[i, 0, :] = s
        perm = list(range(p))
        for sweep in range(h):
            if random_scan:
                for k in range(p - 1, 0, -1):
                    u = rand()
                    r = int(u * (k + 1))
                    perm[k], perm[r] = perm[r], perm[k]
            for t in range(p):
                j = perm[t]
                v = _gibbs_var(rand, s, j, dom, fac_scope_off, fac_scope,
                               fac_off, fac_data, vf_off, vf_fac, vf_pos)
                if v < 0:
                    status = STATUS_ZERO_MASS
                    fail_var = j
                    break
                if v != s[j]:
                    changes[j] += 1
                s[j] = v
            if status != STATUS_OK:
                break
            if retain_all:
                states[i, sweep + 1, :] = s
        if status != STATUS_OK:
            break
        if not retain_all:
            states[i, :] = s
        done += 1
    return {
        "states": states,
        "attempts": attempts,
        "changes": changes,
        "status": status,
        "fail_var": fail_var,
        "done": done,
    }


def run_forward_attempts(flat, n_attempts, bitgen):
    """Run a fixed number of forward attempts; returns the accepted count."""
    (dom, step_kind, step_idx, fwd_scope_off, fwd_scope, fwd_off, fwd_data,
     fac_scope_off, fac_scope, fac_off, fac_data,
     _vf_off, _vf_fac, _vf_pos, acc) = _as_lists(flat)
    rand = Generator(bitgen).random
    s = [0] * len(dom)
    accepted = 0
    for _ in range(n_attempts):
        if _forward_once(rand, s, dom, step_kind, step_idx,
                         fwd_scope_off, fwd_scope, fwd_off, fwd_data,
                         fac_scope_off, fac_scope, fac_off,
                         fac_data, acc):
            accepted += 1
    return accepted
