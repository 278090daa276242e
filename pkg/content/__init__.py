# NucleiGrind Content Package
