#pragma once

#include "ains/observability.hpp"
#include "ains/preintegration.hpp"
#include "ains/simkit.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace ains {

inline constexpr const char* kFormatVersion = "ains-artifacts/1";

// %.17g; non-finite values as nan/inf/-inf.
std::string fmt(double x);

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// t,gx,gy,gz,ax,ay,az
void write_imu_csv(std::ostream& os, const std::vector<ImuSample>& samples);
std::vector<ImuSample> read_imu_csv(std::istream& is);

// t,kind,v1,v2,v3,aux1,aux2,aux3,noise_std; scalar kinds leave v2,v3 empty,
// aux holds `param`. The GPS-velocity body rate is not part of the format.
void write_measurement_csv(std::ostream& os, const std::vector<AidingMeasurement>& meas);
std::vector<AidingMeasurement> read_measurement_csv(std::istream& is);

// t,err_att_rad,err_vel,err_pos,sig_att,sig_vel,sig_pos,nees, then true_/est_ quaternion
// (qw,qx,qy,qz), velocity and position.
std::vector<std::string> run_csv_header();
void write_run_csv(std::ostream& os, const RunRecord& rec);

// dt,k,exact_x,exact_y,exact_z,classical_x,classical_y,classical_z
void write_fig3_csv(std::ostream& os, const std::vector<Fig3Track>& tracks);
nlohmann::json fig3_json(const std::vector<Fig3Track>& tracks);

// set,mean_x,kind,x,y,yaw with kind direct|invariant
void write_banana_csv(std::ostream& os, const std::vector<BananaSet>& sets);
nlohmann::json banana_json(const std::vector<BananaSet>& sets, const BananaConfig& cfg);

// run,x,y
void write_fig6_cloud_csv(std::ostream& os, const Fig6Result& r);
// circle,theta,x,y
void write_fig6_contours_csv(std::ostream& os, const Fig6Result& r);
// k,x,y
void write_fig6_ellipse_csv(std::ostream& os, const Fig6Result& r);
nlohmann::json fig6_json(const Fig6Result& r, const Fig6Config& cfg);

// t, then p05/p50/p95 for att, vel, pos, then mean_nees
void write_mc_quantiles_csv(std::ostream& os, const McSummary& s);
// run,seed,aborted,final_att_rad
void write_mc_runs_csv(std::ostream& os, const McSummary& s);

nlohmann::json run_summary_json(const RunRecord& rec);
nlohmann::json mc_summary_json(const McSummary& s);
nlohmann::json report_json(const ObservabilityReport& r);
nlohmann::json delta_json(const PreintegratedDelta& d);
nlohmann::json matrix_json(const MatX& m);

// Writes with a trailing newline, keys in insertion-independent sorted order.
void write_json(std::ostream& os, const nlohmann::json& j);

// Splits one CSV line on commas (no quoting; none of the formats need it).
std::vector<std::string> split_csv(const std::string& line);

}  // namespace ains
