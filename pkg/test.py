from nh_spinwave.backend.models import Flavor, ModelParams
from nh_spinwave.backend.spectra import spectrum_over_grid
from nh_spinwave.backend.single_mode import build_single_mode_hamiltonian, evolve_ed, ground_state_hermitian
import numpy as np
import time

params = ModelParams(J=1.0, h=20.0, gamma=10.0, n_sites=256)
print("First call:")
print(spectrum_over_grid(Flavor.BOSONIC, params).to_frame().head())

print("\nSecond call:")
print(spectrum_over_grid(Flavor.FERMIONIC, params).to_frame().head())


# bigger grid
# big = ModelParams(J=1.0, h=1.0, gamma=1.0, dimension=2, n_sites=200)
# print(len(spectrum_over_grid(Flavor.BOSONIC, big).grid))

# Single-mode exact evolution (expm per interval)
single = ModelParams(J=1.0, h=5.0, gamma=0.2)
psi0, squeeze = ground_state_hermitian(single.hermitian())
H = build_single_mode_hamiltonian(single)
start = time.time()
evolve_ed(H, psi0, np.linspace(0.0, 10.0, 300))
print("First call time:", time.time() - start)

# Same evolution again (scipy already warmed up)
start = time.time()
evolve_ed(H, psi0, np.linspace(0.0, 10.0, 300))
print("Second call time:", time.time() - start)
