"""Generate one scenario per mobility model and print its mobility metrics side by side.

Group models keep nodes clustered, so they show higher degree, longer links and
lower relative speed than the entity models at the same maximum speed.
"""
from manetlab import MODELS, ScenarioConfig, compute_all, generate, validate


def main(seed: int = 7, max_speed: float = 20.0) -> None:
    print(f"{'model':6} {'ND':>7} {'NP':>7} {'LC':>7} {'LD [s]':>8} {'RS [m/s]':>9}")
    for model in MODELS:
        scen = generate(ScenarioConfig(model=model, max_speed=max_speed, seed=seed))
        assert not validate(scen)
        r = compute_all(scen)
        print(f"{model:6} {r.ND:7.2f} {r.NP:7.2f} {r.LC:7.0f} {r.LD:8.2f} {r.RS:9.2f}")


if __name__ == "__main__":
    main()
