"""Smoke test for the `subrayleigh` extension module."""

import math

import subrayleigh as sr


def main():
    names = sr.scenario_names()
    assert "fig3a" in names and "fig2cd" in names, names

    assert abs(sr.bessel_j1(2.5) - 0.49709410246427403801) < 1e-14
    total = sum(sr.poisson_pmf(k, 14.0) for k in range(200))
    assert abs(total - 1.0) < 1e-12

    for n, ratio, inv, _ in sr.fwhm_sweep(2, 50):
        assert abs(ratio / inv - 1.0) < 0.1, (n, ratio)

    s = sr.Scenario.builtin("fig3d")
    assert sr.Scenario.from_toml(s.to_toml()).to_toml() == s.to_toml()
    s.frames_per_position = 4000
    out = s.run(workers=2)
    assert out.frames_processed == 4000
    assert abs(out.peak_mean_count - 15.0) < 1e-9

    conv = out.image("all_counts")
    exact = out.image("exact:23")
    assert len(conv) == 32 and len(conv[0]) == 32
    pitch = s.pixel_pitch
    x = [(i - 16) * pitch for i in range(32)]
    ratio = sr.fwhm(x, exact[16]) / sr.fwhm(x, conv[16])
    assert 0.2 < ratio < 0.5, ratio

    oracle = s.analytic_pn_map(9)
    assert sr.donut_score(x, oracle[16]) > 0.2

    again = s.run(workers=1)
    assert again.image("exact:9") == out.image("exact:9")

    try:
        sr.Scenario.from_toml("name = 'broken'")
    except ValueError as e:
        assert "missing field" in str(e), e
    else:
        raise AssertionError("incomplete scenario accepted")

    print(f"ok: exact-23/all-counts FWHM ratio {ratio:.3f}, 1/sqrt(23) = {1 / math.sqrt(23):.3f}")


if __name__ == "__main__":
    main()
