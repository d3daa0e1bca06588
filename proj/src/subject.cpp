#include "aan/subject.hpp"

#include <stdexcept>

namespace aan {

void SubjectProfile::validate() const {
  if (!exo.valid() || !human.valid()) throw std::invalid_argument("subject " + name + ": invalid plant parameters");
  if (!hte.valid()) throw std::invalid_argument("subject " + name + ": HTE model requires a1 > 0 and a2 < 0");
  if (!(emg_lead >= 0.0)) throw std::invalid_argument("subject " + name + ": EMG lead k1 must be >= 0");
  if (!(noise_level >= 0.0)) throw std::invalid_argument("subject " + name + ": noise level must be >= 0");
}

void SubjectProfile::write(KeyValueFile& kv) const {
  kv.set("subject.name", name);
  kv.set("exo.J", exo.inertia);
  kv.set("exo.B", exo.damping);
  kv.set("exo.tau_g", exo.gravity_torque);
  kv.set("human.J", human.inertia);
  kv.set("human.B", human.damping);
  kv.set("human.tau_g", human.gravity_torque);
  kv.set("hte.b0", hte.b0);
  kv.set("hte.a1", hte.a1);
  kv.set("hte.a2", hte.a2);
  kv.set("subject.k1", emg_lead);
  kv.set("subject.noise", noise_level);
}

SubjectProfile SubjectProfile::read(const KeyValueFile& kv, SubjectProfile s) {
  s.name = kv.get_string("subject.name", s.name);
  s.exo.inertia = kv.get_double("exo.J", s.exo.inertia);
  s.exo.damping = kv.get_double("exo.B", s.exo.damping);
  s.exo.gravity_torque = kv.get_double("exo.tau_g", s.exo.gravity_torque);
  s.human.inertia = kv.get_double("human.J", s.human.inertia);
  s.human.damping = kv.get_double("human.B", s.human.damping);
  s.human.gravity_torque = kv.get_double("human.tau_g", s.human.gravity_torque);
  s.hte.b0 = kv.get_double("hte.b0", s.hte.b0);
  s.hte.a1 = kv.get_double("hte.a1", s.hte.a1);
  s.hte.a2 = kv.get_double("hte.a2", s.hte.a2);
  s.emg_lead = kv.get_double("subject.k1", s.emg_lead);
  s.noise_level = kv.get_double("subject.noise", s.noise_level);
  s.validate();
  return s;
}

SubjectProfile SubjectProfile::read(const KeyValueFile& kv) { return read(kv, SubjectProfile{}); }

SubjectProfile subject_preset(const std::string& name) {
  SubjectProfile s;
  s.name = name;
  if (name == "S1") {
    s.human = presets::kHumanS1;
    s.hte = presets::kHteS1;
  } else if (name == "S2") {
    s.human = presets::kHumanS2;
    s.hte = presets::kHteS2;
  } else if (name == "S3") {
    s.human = presets::kHumanS3;
    s.hte = presets::kHteS3;
  } else {
    throw std::invalid_argument("unknown subject preset '" + name + "' (expected S1, S2 or S3)");
  }
  return s;
}

std::vector<SubjectProfile> all_subject_presets() {
  return {subject_preset("S1"), subject_preset("S2"), subject_preset("S3")};
}

}  // namespace aan
