"""
Turning capture histories into numbers
======================================

A partial capture history is the 0/1 record of a unit up to (but not
including) the current occasion.  The covariate ``g`` reads that record as a
binary number with the most recent occasion as the most significant bit and
rescales it to [0, 1].  Recent captures therefore move ``g`` a lot, old ones
only a little.
"""

from fractions import Fraction

from recap import CaptureMatrix, CutRecipe, Quantifier, covariate_matrix, cut_partition, named_partition
from recap.partitions import bits_to_str, dyadic_cuts

# One unit caught on occasions 3, 6, 7 and 10 out of 10.
row = (0, 0, 1, 0, 0, 1, 1, 0, 0, 1)
z = covariate_matrix(CaptureMatrix.from_rows([row]), Quantifier("g"))

print("occasion  history-before  g")
for j, value in enumerate(z.exact[0], start=1):
    print(f"{j:>8}  {bits_to_str(row[:j - 1]) or '()':<14}  {str(value):>7} = {float(value):.3f}")

# Each capture leaves a trace that fades as new occasions pile up on top of it.

# Cutting the range of g at 1/2 keeps only the last digit: that is the
# first-order Markov model.  Quarters keep the last two digits.
t = 5
half = cut_partition(CutRecipe(Quantifier("g"), (Fraction(1, 2),)), t)
print("\ng cut at 1/2 equals Mc1:", half.same_as(named_partition("Mc", t, 1)))

quarters = cut_partition(CutRecipe(Quantifier("g"), dyadic_cuts(2)), t)
mc2 = named_partition("Mc", t, 2)
print("g cut at quarters equals Mc2:", quarters.same_as(mc2))

# They differ only for histories shorter than two occasions.  Padding the
# history with two leading zeros (the 'gaug' quantifier) removes the mismatch.
for x in [(), (0,), (1,)]:
    print(f"  {bits_to_str(x) or '()':>3}: g-quarters class {quarters.class_of(x)}, Mc2 class {mc2.class_of(x)}")
aug = cut_partition(CutRecipe(Quantifier("gaug", k=2), dyadic_cuts(2)), t)
print("gaug(2) cut at quarters equals Mc2:", aug.same_as(mc2))

# A single cut at 5/8 gives yet another classical model, ML2.
ml2 = cut_partition(CutRecipe(Quantifier("g"), (Fraction(5, 8),)), t)
print("g cut at 5/8 equals ML2:", ml2.same_as(named_partition("ML2", t)))
for b, cls in enumerate(ml2.classes(), start=1):
    print(f"  H{b}: {' '.join(bits_to_str(x) or '()' for x in cls)}")
