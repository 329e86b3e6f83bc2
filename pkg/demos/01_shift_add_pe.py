"""Multiplying by a 4-bit weight with nothing but shifts and adds.

A UINT4 weight has at most four set bits, so ``w * x`` is the sum of ``x``
shifted left by each set bit position.  For binary16 activations the shift
becomes an increment of the exponent field.
"""
from mixpe import Half, mixpe_a8, mixpe_a16_scale
from mixpe.pe import mixpe_a8_trace
from mixpe.verify import check_a8, check_a16_scale

w, x = 0b1011, -37
product, trace = mixpe_a8_trace(w, x)
print(f"{w} * {x} = {product}")
for bit, term in trace.partial_terms:
    print(f"  bit {bit}: {x} << {bit} = {term}")
print(f"  {trace.shift_count} shifts, {trace.add_count} adds")
assert product == mixpe_a8(w, x) == w * x

# binary16: 1.5 * 4 just bumps the exponent from 15 to 17
h = Half.from_real(1.5)
scaled = Half(mixpe_a16_scale(h, 2))
print(f"{float(h)} * 2**2 = {float(scaled)}  exponent {h.exponent} -> {scaled.exponent}")

# the smallest subnormal shifts its mantissa instead
tiny = Half(0x0001)
print(f"{float(tiny)!r} * 2**3 = {float(Half(mixpe_a16_scale(tiny, 3)))!r}")

print("exhaustive W4A8:", check_a8().summary())
print("exhaustive binary16 scaling:", check_a16_scale().summary())
