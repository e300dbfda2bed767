"""Atomic primitives usable inside nogil compiled kernels.

Exposes a fetch-and-add on int64 arrays, plus a spinlock built from
compare-and-swap on int32 arrays. Workers use the spinlock to serialize
per-cell agent insertion and the fetch-and-add for the on-demand work
counter and the shared slot allocator. Python-level callers must never mix
these with unsynchronized access to the same element.
"""

import numpy as np
from numba import njit, types
from numba.core import cgutils
from numba.extending import intrinsic


@intrinsic
def _fetch_add_i64(typingctx, arr_ty, idx_ty, val_ty):
    sig = types.int64(arr_ty, types.intp, types.int64)

    def codegen(context, builder, signature, args):
        arr, idx, val = args
        ary = context.make_array(signature.args[0])(context, builder, arr)
        ptr = cgutils.get_item_pointer(context, builder, signature.args[0], ary, (idx,))
        return builder.atomic_rmw("add", ptr, val, ordering="monotonic")

    return sig, codegen


@intrinsic
def _cas_i32(typingctx, arr_ty, idx_ty, cmp_ty, val_ty):
    sig = types.boolean(arr_ty, types.intp, types.int32, types.int32)

    def codegen(context, builder, signature, args):
        arr, idx, cmpv, newv = args
        ary = context.make_array(signature.args[0])(context, builder, arr)
        ptr = cgutils.get_item_pointer(context, builder, signature.args[0], ary, (idx,))
        pair = builder.cmpxchg(ptr, cmpv, newv, ordering="acquire", failordering="monotonic")
        return builder.extract_value(pair, 1)

    return sig, codegen


@intrinsic
def _xchg_i32(typingctx, arr_ty, idx_ty, val_ty):
    sig = types.int32(arr_ty, types.intp, types.int32)

    def codegen(context, builder, signature, args):
        arr, idx, val = args
        ary = context.make_array(signature.args[0])(context, builder, arr)
        ptr = cgutils.get_item_pointer(context, builder, signature.args[0], ary, (idx,))
        return builder.atomic_rmw("xchg", ptr, val, ordering="release")

    return sig, codegen


@njit(cache=True, nogil=True)
def fetch_add(counter, idx, amount):
    """Atomically add ``amount`` to ``counter[idx]``; returns the prior value."""
    return _fetch_add_i64(counter, idx, np.int64(amount))


@njit(cache=True, nogil=True)
def lock_acquire(locks, idx):
    while not _cas_i32(locks, idx, np.int32(0), np.int32(1)):
        pass


@njit(cache=True, nogil=True)
def lock_release(locks, idx):
    _xchg_i32(locks, idx, np.int32(0))
