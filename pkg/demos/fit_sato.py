"""Recover the Sato parameter of the F + H2 surface from its saddle.

Targets are generated from the reference surface (delta = 0.164); the fit
starts from delta = 0.30 and uses only the barrier height and saddle
position, the observables a waveguide experiment could read off directly.
The barrier disappears just above delta = 0.164, so a start far on that
side sees only failed evaluations and is reported as not converged.
"""

from coldreact.fit import FitProblem, Objective, apply_params, compute_observables, fit
from coldreact.reference import fh2_surface

truth = fh2_surface()
terms = ("barrier_height", "saddle_q1", "saddle_q2")
targets = compute_observables(truth, terms)

for start in (0.0, 0.30, 0.40):
    problem = FitProblem(
        apply_params(truth, {"delta": start}),
        ("delta",),
        {"delta": (-0.15, 0.45)},
        [Objective(t, targets[t]) for t in terms],
    )
    res = fit(problem)
    print(f"start {start:5.2f} -> delta {res.params['delta']:.6f} ({res.n_evals} evaluations, converged {res.converged})")
