# # Finding influential SNPs with Partition Retention
#
# Scatter the SNPs into many random groups, backward-drop each group to the
# subset with the highest I score, and count how often each SNP survives.

# In[1]:

import numpy as np

from predictivity import disease_model as dm
from predictivity import partition_retention as pr
from predictivity import simulator as sim

model = dm.WORKED_EXAMPLE_TWO.with_noise_snps((0.2,) * 194)
sample = sim.draw_case_control(model, 500, 21)
print(sample.x.shape)


# One backward-dropping pass on a single group, with its trace.

# In[2]:

trace = pr.backward_drop(sample, [0, 1, 50, 51, 52, 53])
for step in trace.steps:
    print(f"drop snp{step.dropped}: I {step.i_before:.2f} -> {step.i_after:.2f}")
print("kept", trace.retained)


# The full procedure: one retention round plus one resuscitation round, in
# which weak SNPs are regrouped with strong ones to expose interactions.

# In[3]:

result = pr.staged_selection(sample, pr.RetentionConfig(seed=1))
print("top SNPs:", result.top(5))
print("frequencies:", np.round(result.frequency[result.top(5)], 3))
for module in result.modules[:3]:
    print(module)


# Staging screens a wide panel cheaply: singletons first, then pairs, then
# groups of six among the survivors.

# In[4]:

staged = pr.staged_selection(sample, pr.RetentionConfig(stages=(1, 2, 6), seed=1))
print("top SNPs:", staged.top(5))
print(staged.flags[-1])
