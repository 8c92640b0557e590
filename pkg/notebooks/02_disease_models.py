# # Disease models and their ideal error
#
# A model gives each SNP a minor allele frequency and each genotype of the
# influential SNPs a probability t(u) of staying healthy.  Genotypes follow
# Hardy-Weinberg proportions.  Everything below is exact, with no sampling.

# In[1]:

from predictivity import disease_model as dm


# One influential SNP among six, all at MAF 0.2.

# In[2]:

model = dm.DiseaseModel.from_values((0.2,) * 6, (0,), (0.97, 0.60, 0.40))
tables = dm.conditional_tables(model)
print("P(diseased)        ", round(tables.f_y_d, 4))
print("genotype | diseased", tables.f_u_given_d.round(3))
print("genotype | healthy ", tables.f_u_given_h.round(3))
print("likelihood ratios  ", tables.likelihood_ratios.round(3))


# theta_e is the error of the Bayes rule on the full genotype; theta_I0 is half
# the squared distance between the two class laws of the influential SNP.  The
# five noise SNPs shrink theta_I by the factor sum f(v)^2 per SNP but leave
# theta_e untouched.

# In[3]:

p = dm.oracle_params(model)
print(f"theta_e={p.theta_e:.4f} theta_I0={p.theta_I0:.4f} noise={p.noise_factor:.5f} "
      f"theta_I={p.theta_I:.4f} bound={p.bound_on_theta_e:.4f}")


# The bound 1/2 - sqrt(theta_I0 / 4) never falls below theta_e.  Sweep the
# MAF for every catalog penetrance and count violations.

# In[4]:

bad = 0
for values in dm.SINGLE_LOCUS_PENETRANCE.values():
    for maf in dm.maf_grid():
        m = dm.DiseaseModel.from_values((maf,) * 6, (0,), values)
        bad += dm.error_bound(dm.theta_I_family(m)[0]) < dm.theta_e(m)
print("violations:", bad)


# Unequal priors and misclassification costs.

# In[5]:

spec = dm.CostPriorSpec.parse("pi_d=0.3,c_d=2,c_h=1")
print(dm.weighted_cost(model, spec))
