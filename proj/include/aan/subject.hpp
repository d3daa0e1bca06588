#pragma once

#include "aan/config.hpp"
#include "aan/hte.hpp"
#include "aan/plant.hpp"

#include <string>
#include <vector>

namespace aan {

/// Simulated participant: limb dynamics, EMG-to-torque model, EMG lead and sensor noise.
struct SubjectProfile {
  std::string name = "S1";
  PlantParams<double> human = presets::kHumanS1;
  PlantParams<double> exo = presets::kExo;
  HteModel<double> hte = presets::kHteS1;
  double emg_lead = 0.2;     // k1, s
  double noise_level = 1e-3;  // std of additive envelope noise, envelope units

  PlantParams<double> combined() const { return exo + human; }
  void validate() const;

  /// Keys: subject.name, exo.J/B/tau_g, human.J/B/tau_g, hte.b0/a1/a2, subject.k1, subject.noise.
  void write(KeyValueFile& kv) const;
  static SubjectProfile read(const KeyValueFile& kv, SubjectProfile base);
  static SubjectProfile read(const KeyValueFile& kv);
};

/// S1, S2 or S3 from the identified tables.
SubjectProfile subject_preset(const std::string& name);
std::vector<SubjectProfile> all_subject_presets();

}  // namespace aan
