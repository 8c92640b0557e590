# # Estimating the error of a variable subset from a sample
#
# Draw a balanced case-control sample, then compare the naive training error,
# its bias-corrected version and the out-of-sample error of the fitted rule
# against the true theta_e.

# In[1]:

from predictivity import disease_model as dm
from predictivity import estimators as est
from predictivity import simulator as sim

model = dm.WORKED_EXAMPLE_ONE
sample = sim.draw_case_control(model, 100, seed := 11)
print(sample.n_d, "cases,", sample.n_h, "controls, seed", seed)


# The training estimate reuses the data that built the rule, so it is too
# optimistic.  The corrected estimate divides out the expected relative bias.

# In[2]:

counts = est.cell_counts(sample, range(model.n_snps))
print("true theta_e       ", round(dm.theta_e(model), 4))
print("training           ", round(est.theta_e_train(counts), 4))
print("corrected          ", round(est.theta_e_train_corrected(counts).value, 4))
print("out-of-sample      ", round(est.theta_e_oos_oracle(counts, model), 4))


# The I score for the influential SNP alone, and the same with a noise SNP
# added.  Spreading the sample over more cells costs more than it gains.

# In[3]:

print(est.i_score(sample, ["snp0"]), est.i_score(sample, ["snp0", "snp1"]))


# estimate() bundles every quantity into one report.  Passing the model turns
# on the oracle columns, marginalized onto the chosen subset.

# In[4]:

report = est.estimate(sample, ["snp0"], truth=model)
for key, value in report.items():
    print(f"{key:28s} {value}")
