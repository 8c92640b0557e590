# # Exact binomial bias terms
#
# Two independent binomials Z ~ Bin(n, p_Z) and W ~ Bin(n, p_W) with p_Z >= p_W.
# The training error of a plug-in classifier involves E min(Z, W), which sits
# below n p_W; b measures how far, relative to n p_W.  The out-of-sample error
# involves a = Pr(Z < W) + Pr(Z = W)/2.

# In[1]:

import numpy as np

from predictivity import exact_binomial as eb


# Both functionals are computed from tail sums, in O(n) time, so n in the
# thousands is instant.

# In[2]:

n, lam, r = 500, 2.5, 2.0
pair = eb.BinomialPair(n, lam / n, lam / (n * r))
print("E min(Z, W) =", eb.expected_min(pair))
print("n p_W       =", n * pair.p_w)
print("b           =", eb.neg_rel_bias(500, 2.5, 2.0))
print("a           =", eb.tie_half_prob(500, 2.5, 2.0))


# b falls toward 0 as the expected count lambda = n p_Z grows, and rises toward
# 1 as the two probabilities move apart at small counts.

# In[3]:

for lam in (40, 10, 2.5, 0.625, 0.15625):
    row = [eb.neg_rel_bias(500, lam, r) for r in (40, 10, 2, 1.25, 1.0625)]
    print(f"lambda={lam:<8}", " ".join(f"{v:.4f}" for v in row))


# With r = 1 the two counts are exchangeable, so a is exactly one half.

# In[4]:

print(eb.tie_half_prob(2500, 40, 1.0))
grid = eb.bias_grid([100, 2500], [2.5, 40], [1.25, 5])
print(np.array([(p.n, p.lam, p.r, p.b, p.a) for p in grid]).round(4))
