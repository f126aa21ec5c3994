"""Same density operator, different work statistics.

Samples the thermal eigenstate mixture and the coherent-state mixture of the
driven oscillator with the analytic engine and prints <W> and <exp(-beta W)>
next to the closed forms.
"""
import math

from bohmwork import (MixtureSpec, OscillatorParams, ThermalCoherent, ThermalEigenstates,
                      exp_work, exp_work_coherent_exact, exp_work_eigenmixture, mean_work,
                      mixture_work_distribution)

p = OscillatorParams()
budget = 200_000
print(f"(A tau)^2 / 2m = {(p.A * p.tau) ** 2 / (2 * p.m):.4f}")
for beta in (0.1, 0.5, 1.0):
    eig = mixture_work_distribution(MixtureSpec(ThermalEigenstates(beta), p), "analytic", budget, 0)
    coh = mixture_work_distribution(MixtureSpec(ThermalCoherent(beta, budget), p), "analytic", budget, 0)
    fe, fc = exp_work(eig, beta), exp_work(coh, beta)
    print(f"beta={beta:<4}  <W> eigen {mean_work(eig).value:.4f}  coherent {mean_work(coh).value:.4f}")
    print(f"           <e^-bW> eigen {fe.value:.4f} +/- {fe.stderr:.4f} (exact {exp_work_eigenmixture(p, beta):.4f})"
          f"  coherent {fc.value:.4f} +/- {fc.stderr:.4f} (exact {exp_work_coherent_exact(p, beta):.4g})")
print("the coherent value is infinite at beta=1: its estimate is dominated by rare labels"
      if math.isinf(exp_work_coherent_exact(p, 1.0)) else "")
