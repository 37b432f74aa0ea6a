"""Stand-in trainer for the hyperparameter demo study.

A real training run takes hours; this script plays back the converged
training error curve recorded for each optimizer step size, so the whole
pipeline (expansion, execution, collection, comparison, reporting) can be
exercised in seconds. The network shape and iteration budget arrive as
placeholders but only the step size changes the curve.
"""

OPTIMIZER_STEP = "{{OPTIMIZER_STEP}}"
HIDDEN_LAYERS = "{{HIDDEN_LAYERS}}"
MAX_ITERATIONS = int("{{MAX_ITERATIONS}}")

# Final training MSE per epoch for each step size, with layers 10,10,10,10
# and 3000 iterations per epoch.
CURVES = {
    "0.0001": ["1.091560", "1.082970", "1.077200", "1.072650"],
    "0.001": ["0.992354", "0.991959", "0.995102", "0.996143"],
}


def main() -> None:
    try:
        curve = CURVES[OPTIMIZER_STEP]
    except KeyError:
        raise SystemExit(f"no recorded curve for step size {OPTIMIZER_STEP}")
    with open("training.csv", "w", encoding="ascii") as fh:
        fh.write("EPOCH,TRAINING_MSE\n")
        for epoch, mse in enumerate(curve, start=1):
            fh.write(f"{epoch},{mse}\n")
    # Primary data stand-in: bulky artifacts that must never be archived.
    with open("weights.dat", "wb") as fh:
        fh.write(b"\x00" * 4096)


if __name__ == "__main__":
    main()
