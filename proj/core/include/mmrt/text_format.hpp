#pragma once

// Textual `.mm` format.
//
//   # comment
//   megamodel SelfRepair {
//     model ArchModel name "Architectural Model" : ReflectionModel;
//     model Layer1 : ReflectionModel = megamodel SelfRepairL1;
//     initial Start;
//     final Analyzed;
//     decision NeedDeepAnalysis;
//     op Update : Monitor behavior "update" {
//       reads TGGRules;
//       writes ArchModel;
//       status done;
//     }
//     call Analyze = SelfRepairAnalysis.Analyze map { Failures -> failures, OK -> ok };
//     Start -> Update;
//     Update.done -> CheckForFailures;
//     NeedDeepAnalysis -> [count(CheckForFailures.no_failures) > 5] DeepAnalysis;
//     NeedDeepAnalysis -> else Repair;
//   }
//
// Transition ids default to `Source.label`; any other id is written with a
// trailing `as Id`.

#include <string>
#include <string_view>
#include <vector>

#include "mmrt/metamodel.hpp"

namespace mmrt {

/// Parses every megamodel block in `text`. The result is not validated.
/// Throws ERR_SYNTAX or ERR_DUP_NAME with a span inside `text`.
std::vector<MegamodelDef> parse_megamodels(std::string_view text, std::string_view file = {});

/// Canonical text for `defs`, in the given order.
std::string serialize(const std::vector<MegamodelDef>& defs);
std::string serialize(const MegamodelDef& def);

/// Reads and parses a file; throws ERR_IO when it cannot be read.
std::vector<MegamodelDef> load_megamodel_file(const std::string& path);

}  // namespace mmrt
