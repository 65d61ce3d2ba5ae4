#!/usr/bin/env python3
"""Independent high-precision evaluation of the link model.

Run: python3 tests/oracles/photonics_oracle.py
The printed values are frozen into tests/test_photonics.cpp.
"""
from mpmath import mp, mpf, exp, log, power

mp.dps = 40


def h2(p):
    p = mpf(p)
    if p == 0 or p == 1:
        return mpf(0)
    return -p * log(p, 2) - (1 - p) * log(1 - p, 2)


def gain(mu, eta, y0):
    return mpf(y0) + 1 - exp(-mpf(eta) * mpf(mu))


def qber(mu, eta, y0, ed, e0=mpf("0.5")):
    return (mpf(e0) * mpf(y0) + mpf(ed) * (1 - exp(-mpf(eta) * mpf(mu)))) / gain(mu, eta, y0)


def key_rate(mu, nu, eta_det, duty, y0, ed, loss_db, f=mpf("1.16"), q=mpf("0.5"),
             mix=(14, 1, 1), rate=mpf("2e7"), e0=mpf("0.5")):
    mu, nu = mpf(mu), mpf(nu)
    t = power(10, mpf(loss_db) / 10)
    eta = t * mpf(eta_det) * mpf(duty)
    qm, qn = gain(mu, eta, y0), gain(nu, eta, y0)
    em, en = qber(mu, eta, y0, ed, e0), qber(nu, eta, y0, ed, e0)
    y1 = (mu / (mu * nu - nu * nu)) * (qn * exp(nu) - qm * exp(mu) * nu ** 2 / mu ** 2
                                       - (mu ** 2 - nu ** 2) / mu ** 2 * mpf(y0))
    y1 = max(y1, mpf(0))
    e1 = (en * qn * exp(nu) - e0 * mpf(y0)) / (y1 * nu)
    e1 = min(max(e1, mpf(0)), mpf(1))
    q1 = y1 * mu * exp(-mu)
    frac = mpf(mix[0]) / sum(mix)
    per_pulse = -qm * f * h2(em) + q1 * (1 - h2(min(e1, mpf("0.5"))))
    return dict(eta=eta, qm=qm, qn=qn, em=em, en=en, y1=y1, e1=e1,
                rate=rate * frac * q * max(per_pulse, mpf(0)))


if __name__ == "__main__":
    print("transmittance(-18.4)      =", mp.nstr(power(10, mpf("-18.4") / 10), 15))
    print("loss(85.1 km intercity)   =", mp.nstr(-mpf("85.1") * mpf("0.21"), 15))
    print("loss(69.7 km intercity)   =", mp.nstr(-mpf("69.7") * mpf("0.21"), 15))
    print("gain(0.65,1e-3,5e-6)      =", mp.nstr(gain("0.65", "1e-3", "5e-6"), 15))
    print("qber(0.65,1e-3,5e-6,.01)  =", mp.nstr(qber("0.65", "1e-3", "5e-6", "0.01"), 15))
    print("h2(0.11)                  =", mp.nstr(h2("0.11"), 15))
    print("splitter(2)               =", mp.nstr(-10 * log(2, 10), 15))
    print("splitter(8)               =", mp.nstr(-10 * log(8, 10), 15))
    r = key_rate("0.65", "0.1", "0.1", 1, "5e-6", "0.01", "-18.4")
    for k, v in r.items():
        print(f"key_rate example {k:5s}    =", mp.nstr(v, 15))
