#include "gaitlab/trajectory_dump.hpp"

#include <iomanip>
#include <sstream>

namespace gaitlab {

TrajectoryDump::TrajectoryDump(std::ostream& out, const RobotModel& model)
    : out_(out),
      dofs_(model.num_dofs()),
      joints_(model.num_joints()),
      feet_(static_cast<int>(model.feet.size())) {
  out_ << header(model) << '\n';
}

std::string TrajectoryDump::header(const RobotModel& model) {
  std::ostringstream h;
  h << 't';
  for (int i = 0; i < model.num_dofs(); ++i) h << ",q" << i;
  for (int i = 0; i < model.num_dofs(); ++i) h << ",qd" << i;
  for (int i = 0; i < model.num_joints(); ++i) h << ",tau" << i;
  // Per-foot normal force columns; the biped names them Fl and Fr.
  for (const auto& f : model.feet) {
    if (f.side == Side::left) h << ",Fl";
    else if (f.side == Side::right) h << ",Fr";
    else h << ",F_" << f.name;
  }
  return h.str();
}

void TrajectoryDump::write(const SimState& s) {
  out_ << std::setprecision(17) << s.t;
  for (int i = 0; i < dofs_; ++i) out_ << ',' << s.q[i];
  for (int i = 0; i < dofs_; ++i) out_ << ',' << s.qd[i];
  for (int i = 0; i < joints_; ++i) out_ << ',' << (i < s.tau.size() ? s.tau[i] : 0.0);
  for (int f = 0; f < feet_; ++f) out_ << ',' << (f < static_cast<int>(s.feet.size()) ? s.feet[f].normal_force : 0.0);
  out_ << '\n';
}

}  // namespace gaitlab
