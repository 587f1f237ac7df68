#pragma once

// Bundled topologies; generated from data/*.topo (keep both in sync).

#include <string>
#include <string_view>

#include "sdnroute/topology.hpp"

namespace sdnroute {

enum class BuiltinTopology { abilene, geant, paper_fig3 };

namespace detail {

inline constexpr std::string_view k_abilene_topo = R"topo(sdnroute-topology 1
# Abilene (Internet2) backbone, 11 PoPs / 14 bidirectional links = 28 directed links.
# Wiring from the public Abilene topology snapshot used in traffic-engineering datasets.
# delay_ms = great-circle distance / 200 km per ms; bandwidth uniform 100 Mbps; loss 0.
# Domain 0 = western PoPs, domain 1 = eastern PoPs.
name abilene

[nodes]
STTL role=switch domain=0
SNVA role=switch domain=0
LOSA role=switch domain=0
DNVR role=switch domain=0
KSCY role=switch domain=0
HSTN role=switch domain=0
IPLS role=switch domain=1
ATLA role=switch domain=1
CHIN role=switch domain=1
NYCM role=switch domain=1
WASH role=switch domain=1

[links]
STTL <-> SNVA delay_ms=5.694 loss_prob=0 bandwidth_mbps=100
STTL <-> DNVR delay_ms=8.204 loss_prob=0 bandwidth_mbps=100
SNVA <-> LOSA delay_ms=2.519 loss_prob=0 bandwidth_mbps=100
SNVA <-> DNVR delay_ms=7.517 loss_prob=0 bandwidth_mbps=100
LOSA <-> HSTN delay_ms=11.029 loss_prob=0 bandwidth_mbps=100
DNVR <-> KSCY delay_ms=4.483 loss_prob=0 bandwidth_mbps=100
KSCY <-> HSTN delay_ms=5.205 loss_prob=0 bandwidth_mbps=100
KSCY <-> IPLS delay_ms=3.633 loss_prob=0 bandwidth_mbps=100
HSTN <-> ATLA delay_ms=5.641 loss_prob=0 bandwidth_mbps=100
ATLA <-> IPLS delay_ms=3.438 loss_prob=0 bandwidth_mbps=100
ATLA <-> WASH delay_ms=4.364 loss_prob=0 bandwidth_mbps=100
IPLS <-> CHIN delay_ms=1.326 loss_prob=0 bandwidth_mbps=100
CHIN <-> NYCM delay_ms=5.72 loss_prob=0 bandwidth_mbps=100
NYCM <-> WASH delay_ms=1.636 loss_prob=0 bandwidth_mbps=100
)topo";

inline constexpr std::string_view k_geant_topo = R"topo(sdnroute-topology 1
# GEANT pan-European research backbone, 22 PoPs / 37 bidirectional links = 74 directed links.
# Wiring pinned to a reconstruction of the 2004-era GEANT core (country PoPs plus the New York uplink).
# delay_ms = great-circle distance / 200 km per ms; bandwidth uniform 100 Mbps; loss 0.
# Domain 0 = western PoPs, domain 1 = central/eastern PoPs.
name geant

[nodes]
AT role=switch domain=1
BE role=switch domain=0
CH role=switch domain=0
CZ role=switch domain=1
DE role=switch domain=1
ES role=switch domain=0
FR role=switch domain=0
GR role=switch domain=1
HR role=switch domain=1
HU role=switch domain=1
IE role=switch domain=0
IL role=switch domain=1
IT role=switch domain=0
LU role=switch domain=0
NL role=switch domain=0
NY role=switch domain=0
PL role=switch domain=1
PT role=switch domain=0
SE role=switch domain=1
SI role=switch domain=1
SK role=switch domain=1
UK role=switch domain=0

[links]
AT <-> DE delay_ms=2.987 loss_prob=0 bandwidth_mbps=100
AT <-> HU delay_ms=1.071 loss_prob=0 bandwidth_mbps=100
AT <-> SI delay_ms=1.387 loss_prob=0 bandwidth_mbps=100
AT <-> SK delay_ms=0.276 loss_prob=0 bandwidth_mbps=100
AT <-> CH delay_ms=4.019 loss_prob=0 bandwidth_mbps=100
BE <-> NL delay_ms=0.866 loss_prob=0 bandwidth_mbps=100
BE <-> FR delay_ms=1.318 loss_prob=0 bandwidth_mbps=100
CH <-> FR delay_ms=2.052 loss_prob=0 bandwidth_mbps=100
CH <-> IT delay_ms=1.251 loss_prob=0 bandwidth_mbps=100
CZ <-> DE delay_ms=2.054 loss_prob=0 bandwidth_mbps=100
CZ <-> SK delay_ms=1.447 loss_prob=0 bandwidth_mbps=100
CZ <-> PL delay_ms=1.558 loss_prob=0 bandwidth_mbps=100
DE <-> NL delay_ms=1.819 loss_prob=0 bandwidth_mbps=100
DE <-> FR delay_ms=2.389 loss_prob=0 bandwidth_mbps=100
DE <-> IT delay_ms=2.592 loss_prob=0 bandwidth_mbps=100
DE <-> SE delay_ms=5.934 loss_prob=0 bandwidth_mbps=100
DE <-> GR delay_ms=9.002 loss_prob=0 bandwidth_mbps=100
IL <-> IT delay_ms=13.26 loss_prob=0 bandwidth_mbps=100
ES <-> FR delay_ms=5.263 loss_prob=0 bandwidth_mbps=100
ES <-> IT delay_ms=5.938 loss_prob=0 bandwidth_mbps=100
ES <-> PT delay_ms=2.515 loss_prob=0 bandwidth_mbps=100
FR <-> LU delay_ms=1.434 loss_prob=0 bandwidth_mbps=100
FR <-> UK delay_ms=1.717 loss_prob=0 bandwidth_mbps=100
GR <-> IT delay_ms=7.31 loss_prob=0 bandwidth_mbps=100
HR <-> HU delay_ms=1.499 loss_prob=0 bandwidth_mbps=100
HR <-> SI delay_ms=0.585 loss_prob=0 bandwidth_mbps=100
IE <-> UK delay_ms=2.315 loss_prob=0 bandwidth_mbps=100
IL <-> NL delay_ms=16.473 loss_prob=0 bandwidth_mbps=100
LU <-> DE delay_ms=0.955 loss_prob=0 bandwidth_mbps=100
NL <-> UK delay_ms=1.789 loss_prob=0 bandwidth_mbps=100
NL <-> NY delay_ms=29.317 loss_prob=0 bandwidth_mbps=100
UK <-> NY delay_ms=27.852 loss_prob=0 bandwidth_mbps=100
PL <-> SE delay_ms=3.864 loss_prob=0 bandwidth_mbps=100
PL <-> DE delay_ms=3.14 loss_prob=0 bandwidth_mbps=100
PT <-> UK delay_ms=7.927 loss_prob=0 bandwidth_mbps=100
SE <-> UK delay_ms=7.164 loss_prob=0 bandwidth_mbps=100
HU <-> SK delay_ms=0.806 loss_prob=0 bandwidth_mbps=100
)topo";

inline constexpr std::string_view k_paper_fig3_topo = R"topo(sdnroute-topology 1
# 16 switches on a 4x4 grid plus 3 hosts; one controller domain per 2x2 quadrant.
# Hop distances: h1-h2 = 4, h1-h3 = 6, h2-h3 = 6. All links 1 ms, 100 Mbps, loss 0.
name paper_fig3

[nodes]
s1 role=switch domain=0
s2 role=switch domain=0
s3 role=switch domain=1
s4 role=switch domain=1
s5 role=switch domain=0
s6 role=switch domain=0
s7 role=switch domain=1
s8 role=switch domain=1
s9 role=switch domain=2
s10 role=switch domain=2
s11 role=switch domain=3
s12 role=switch domain=3
s13 role=switch domain=2
s14 role=switch domain=2
s15 role=switch domain=3
s16 role=switch domain=3
h1 role=host domain=0
h2 role=host domain=1
h3 role=host domain=2

[links]
s1 <-> s2 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s1 <-> s5 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s2 <-> s3 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s2 <-> s6 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s3 <-> s4 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s3 <-> s7 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s4 <-> s8 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s5 <-> s6 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s5 <-> s9 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s6 <-> s7 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s6 <-> s10 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s7 <-> s8 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s7 <-> s11 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s8 <-> s12 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s9 <-> s10 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s9 <-> s13 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s10 <-> s11 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s10 <-> s14 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s11 <-> s12 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s11 <-> s15 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s12 <-> s16 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s13 <-> s14 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s14 <-> s15 delay_ms=1 loss_prob=0 bandwidth_mbps=100
s15 <-> s16 delay_ms=1 loss_prob=0 bandwidth_mbps=100
h1 <-> s1 delay_ms=1 loss_prob=0 bandwidth_mbps=100
h2 <-> s3 delay_ms=1 loss_prob=0 bandwidth_mbps=100
h3 <-> s14 delay_ms=1 loss_prob=0 bandwidth_mbps=100
)topo";

}  // namespace detail

inline Topology builtin_topology(BuiltinTopology which) {
  switch (which) {
    case BuiltinTopology::abilene: return parse_topology(detail::k_abilene_topo, "builtin:abilene");
    case BuiltinTopology::geant: return parse_topology(detail::k_geant_topo, "builtin:geant");
    case BuiltinTopology::paper_fig3: return parse_topology(detail::k_paper_fig3_topo, "builtin:paper_fig3");
  }
  throw ValidationError("unknown builtin topology");
}

inline Topology builtin_topology(std::string_view name) {
  if (name == "abilene") return builtin_topology(BuiltinTopology::abilene);
  if (name == "geant") return builtin_topology(BuiltinTopology::geant);
  if (name == "paper_fig3") return builtin_topology(BuiltinTopology::paper_fig3);
  throw ValidationError("unknown builtin topology '" + std::string(name) + "'");
}

inline bool is_builtin_topology(std::string_view name) {
  return name == "abilene" || name == "geant" || name == "paper_fig3";
}

/// A builtin name or a path to a topology file.
inline Topology resolve_topology(const std::string& ref) {
  return is_builtin_topology(ref) ? builtin_topology(ref) : load_topology(ref);
}

}  // namespace sdnroute
