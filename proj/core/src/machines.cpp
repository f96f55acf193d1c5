#include "tsopt/machines.hpp"

namespace tsopt {

namespace {

PssGradient unit(PssInput i) {
  PssGradient g = PssGradient::Zero();
  g[i] = 1.0;
  return g;
}

}  // namespace

PssOutput pss_dynamics(const PssParams& p, double omega, const PssState& s) {
  p.validate();
  const double u0 = p.ks * omega;
  const double u1 = u0 - s.xw;
  const double y1 = s.x1 + (p.t1 / p.t2) * (u1 - s.x1);
  PssOutput out;
  out.dxw = (u0 - s.xw) / p.tw;
  out.dx1 = (u1 - s.x1) / p.t2;
  out.dx2 = (y1 - s.x2) / p.t4;
  out.vs = s.x2 + (p.t3 / p.t4) * (y1 - s.x2);
  return out;
}

PssPartials pss_partials(const PssParams& p, double omega, const PssState& s) {
  PssPartials out;
  out.value = pss_dynamics(p, omega, s);

  const double u0 = p.ks * omega;
  const double u1 = u0 - s.xw;
  PssGradient g_u0 = PssGradient::Zero();
  g_u0[kPssOmega] = p.ks;
  g_u0[kPssKs] = omega;
  const PssGradient g_u1 = g_u0 - unit(kPssXw);

  out.dxw = (g_u0 - unit(kPssXw)) / p.tw;

  const double a1 = p.t1 / p.t2;
  const double e1 = u1 - s.x1;
  const PssGradient g_e1 = g_u1 - unit(kPssX1);
  out.dx1 = g_e1 / p.t2 - unit(kPssT2) * (e1 / (p.t2 * p.t2));

  const double y1 = s.x1 + a1 * e1;
  const PssGradient g_a1 = unit(kPssT1) / p.t2 - unit(kPssT2) * (p.t1 / (p.t2 * p.t2));
  const PssGradient g_y1 = unit(kPssX1) + a1 * g_e1 + e1 * g_a1;

  const double a2 = p.t3 / p.t4;
  const double e2 = y1 - s.x2;
  const PssGradient g_e2 = g_y1 - unit(kPssX2);
  out.dx2 = g_e2 / p.t4 - unit(kPssT4) * (e2 / (p.t4 * p.t4));

  const PssGradient g_a2 = unit(kPssT3) / p.t4 - unit(kPssT4) * (p.t3 / (p.t4 * p.t4));
  out.vs = unit(kPssX2) + a2 * g_e2 + e2 * g_a2;
  return out;
}

}  // namespace tsopt
