#ifndef BOSONIC_LEDGER_HPP
#define BOSONIC_LEDGER_HPP

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace bosonic {

/// One record of the energy ledger. Column order is part of the CSV format.
struct LedgerRow {
  double t = 0.0;
  double E = 0.0;
  double dirichlet = 0.0;
  double B_term = 0.0;
  double V_term = 0.0;
  double S_tilde = 0.0;
  double kinetic = 0.0;          ///< integral |du/dt|^2 dvol over the last step
  double cum_dissipation = 0.0;  ///< sum over steps of kinetic * dt
  double hess_diag = 0.0;        ///< integral |Hess u|^2 (flat second differences)
  double sup_local_energy = 0.0;
  double dt = 0.0;

  static constexpr std::array<std::string_view, 11> kColumns = {
      "t", "E", "dirichlet", "B_term", "V_term", "S_tilde", "kinetic", "cum_dissipation", "hess_diag",
      "sup_local_energy", "dt"};

  std::array<double, 11> as_array() const {
    return {t, E, dirichlet, B_term, V_term, S_tilde, kinetic, cum_dissipation, hess_diag, sup_local_energy, dt};
  }
  static LedgerRow from_array(const std::array<double, 11>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7], a[8], a[9], a[10]};
  }
};

using EnergyLedger = std::vector<LedgerRow>;

enum class EventKind { concentration, stiffness };

inline std::string to_string(EventKind k) { return k == EventKind::concentration ? "concentration" : "stiffness"; }

/// A detected singular point (or a dt collapse without concentration).
struct SingularEvent {
  double t = 0.0;
  int ix = 0;
  int iy = 0;
  double R = 0.0;
  double local_energy = 0.0;
  EventKind kind = EventKind::concentration;
};

}  // namespace bosonic

#endif  // BOSONIC_LEDGER_HPP
