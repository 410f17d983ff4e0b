#ifndef TUMORSCOPE_BRODMANN_NAMES_HPP
#define TUMORSCOPE_BRODMANN_NAMES_HPP

#include <array>
#include <string_view>

namespace tumorscope {

inline constexpr int kMinAreaId = 1;
inline constexpr int kMaxAreaId = 47;

// Index 0 holds area 1. Mirrors data/brodmann_names.tsv.
inline constexpr std::array<std::string_view, kMaxAreaId> kBrodmannNames = {
    "Primary somatosensory cortex (postcentral gyrus, area 1)",
    "Primary somatosensory cortex (postcentral gyrus, area 2)",
    "Primary somatosensory cortex (postcentral gyrus, area 3)",
    "Primary motor cortex",
    "Somatosensory association cortex (superior parietal lobule)",
    "Premotor cortex and supplementary motor area",
    "Visuomotor coordination area (precuneus and superior parietal lobule)",
    "Frontal eye fields",
    "Dorsolateral prefrontal cortex (area 9)",
    "Anterior prefrontal cortex (frontopolar area)",
    "Orbitofrontal area",
    "Orbitofrontal area (rostral)",
    "Insular cortex",
    "Brodmann area 14",
    "Brodmann area 15",
    "Brodmann area 16",
    "Primary visual cortex (V1)",
    "Secondary visual cortex (V2)",
    "Associative visual cortex (V3, V4, V5)",
    "Inferior temporal gyrus",
    "Middle temporal gyrus",
    "Superior temporal gyrus",
    "Ventral posterior cingulate cortex",
    "Ventral anterior cingulate cortex",
    "Subgenual area",
    "Ectosplenial portion of the retrosplenial region",
    "Piriform cortex",
    "Posterior entorhinal cortex",
    "Retrosplenial cingulate cortex",
    "Agranular retrolimbic area (cingulate cortex)",
    "Dorsal posterior cingulate cortex",
    "Dorsal anterior cingulate cortex",
    "Pregenual area (anterior cingulate cortex)",
    "Anterior entorhinal cortex",
    "Perirhinal cortex",
    "Ectorhinal area (parahippocampal cortex)",
    "Fusiform gyrus",
    "Temporopolar area",
    "Angular gyrus",
    "Supramarginal gyrus",
    "Primary auditory cortex (anterior transverse temporal area)",
    "Secondary auditory cortex (posterior transverse temporal area)",
    "Primary gustatory cortex (subcentral area)",
    "Pars opercularis (Broca's area)",
    "Pars triangularis (Broca's area)",
    "Dorsolateral prefrontal cortex (area 46)",
    "Pars orbitalis (inferior prefrontal gyrus)",
};

}  // namespace tumorscope

#endif  // TUMORSCOPE_BRODMANN_NAMES_HPP
