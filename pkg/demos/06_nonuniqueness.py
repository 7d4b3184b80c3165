"""Two different laws whose convolutions with any band-limited law agree."""

from convthm import nonuniq

ne = nonuniq.verify_mu_neq_nu()
print(f"TV(mu, nu) = {ne.value('tv_mu_nu'):.4f}  (an atomic and a smooth law)")
for eta in ("nu", "scaled:2", "gauss"):
    r = nonuniq.verify_equal_convolutions(eta)
    key = "tv" if r.info["verdict"] == "premise holds" else "tv_separation"
    print(f"eta = {eta:<9} {r.info['verdict']:<17} TV(mu*eta, nu*eta) = {r.value(key):.2e}")

print()
print("atomic mass defect as the atom count grows:")
for K in (100, 1000, 10_000):
    print(f"  K={K:<6} 1 - mass = {1 - nonuniq.mu_raw_mass(K):.3e}")
