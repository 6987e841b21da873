import numpy as np
import normalizer
from normalizer.kolmogorov import reduce_to_torus_nf

# Kolmogorov -> Birkhoff -> stability time on the golden-ratio benchmark

if __name__ == "__main__":
    normalizer.FileManager.working_dir = "tmp/benchmark"
    normalizer.FileManager.loading_enabled = False

    model = normalizer.load_model("benchmark")
    kolmogorov = normalizer.kolmogorov_normalize(model.kolmogorov_input(), 8)
    kolmogorov.save("kolmogorov")
    print("generating function norms:", [chi1 + chi2 for _, chi1, chi2 in kolmogorov.gen_norms])
    print("decay ratio:", kolmogorov.decay_ratio)

    birkhoff = normalizer.birkhoff_normalize(reduce_to_torus_nf(kolmogorov), model.omega, 5)
    print("remainder norms:", birkhoff.D_table)

    curve = normalizer.stability_curve(np.geomspace(1e-6, 1e-2, 81), birkhoff.D_table)
    curve.save("stability/curve.csv")
    normalizer.plot_stability([curve], "stability/curve.svg", T_target=1e10)
    print("optimal order changes at rho0 =", curve.slope_changes)
