import normalizer
from normalizer.dynamics import frequency_report

# fast frequencies of Jupiter and Saturn from a direct integration

if __name__ == "__main__":
    normalizer.FileManager.working_dir = "tmp/sjs"

    model = normalizer.load_model("sjs")
    trajectory = normalizer.integrate(model.state(), 1e4, 0.01, stride=100)
    print("conservation:", trajectory.conservation())

    estimates = {}
    for body, n_star in zip(["jupiter", "saturn"], model.n_star):
        signal = trajectory.signal(body, convention=model.convention)
        estimates[body] = normalizer.frequency_analysis(signal, trajectory.sample_step, 3)
        print(f"{body}: n = {estimates[body][0].freq:.12f} (reference {n_star})")
    frequency_report(estimates)
